//! With a stepsize exponent above one the stepsizes are summable, the
//! iteration freezes wherever the first steps left it, and the discrepancy
//! principle can fail to trigger no matter the budget. Exponents below one
//! are shown for contrast.
//!
//! ```bash
//! cargo run --release --example nontermination
//! ```

use morozov::harness::{run_nontermination, ExperimentSpec, Mode, ProblemKind, SpectralParams};

fn main() -> morozov::Result<()> {
    let spec = ExperimentSpec {
        problem: ProblemKind::Spectral,
        n: 3,
        spectral: SpectralParams {
            p: 1.0,
            decay: 1.0,
            w_norm: 1.0,
        },
        alphas: vec![0.3, 1.5],
        deltas: vec![1e-3],
        runs: 100,
        max_epochs: 2000,
        check_frequency: 1,
        mode: Mode::Nonterm,
        ..ExperimentSpec::default()
    };
    let rows = run_nontermination(&spec)?;
    println!(
        "{:>7} {:>8} {:>7} {:>11} {:>9}",
        "alpha", "delta", "runs", "exhausted", "fraction"
    );
    for r in &rows {
        println!(
            "{:>7} {:>8.0e} {:>7} {:>11} {:>9.2}",
            r.alpha, r.delta_rel, r.runs, r.n_exhausted, r.fraction
        );
    }
    Ok(())
}
