//! Mean squared error and stopping epochs of discrepancy-stopped SGD
//! against the Landweber benchmark, over a grid of stepsize exponents and
//! noise levels (a desk-scale version of the study tables).
//!
//! ```bash
//! cargo run --release --example run_table
//! ```

use morozov::harness::{report, run_table, ExperimentSpec, Mode, ProblemKind};

fn main() -> morozov::Result<()> {
    let spec = ExperimentSpec {
        problem: ProblemKind::Phillips,
        n: 200,
        alphas: vec![0.1, 0.3, 0.5],
        deltas: vec![1e-3, 1e-2, 5e-2],
        runs: 20,
        mode: Mode::Lm,
        ..ExperimentSpec::default()
    };
    let rows = run_table(&spec)?;
    print!("{}", report::render_table(&rows));
    println!();
    println!("epochs count SGD iterations divided by n = {}.", spec.n);
    Ok(())
}
