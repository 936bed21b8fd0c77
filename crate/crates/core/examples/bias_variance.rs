//! Bias-variance decomposition of the SGD error and residual along the
//! iteration, estimated from an ensemble on a single noisy observation.
//! The residual variance stays well below the mean squared residual around
//! the mean-iteration stopping index, which is why single-path residuals
//! can drive the stopping rule.
//!
//! ```bash
//! cargo run --release --example bias_variance
//! ```

use morozov::harness::{run_decompose, ExperimentSpec, Mode, ProblemKind};

fn main() -> morozov::Result<()> {
    let spec = ExperimentSpec {
        problem: ProblemKind::Phillips,
        n: 200,
        alphas: vec![0.1],
        deltas: vec![5e-3],
        runs: 50,
        mode: Mode::Decompose,
        ..ExperimentSpec::default()
    };
    let cells = run_decompose(&spec)?;
    let cell = &cells[0];
    let s = &cell.series;
    println!(
        "noise level delta^2 = {:.4e}; mean-iteration stop index: {:?}",
        s.delta_sq, cell.expected_stop
    );
    println!(
        "{:>7} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "k", "mse", "err_var", "msr", "res_var", "res_ratio"
    );
    for (i, &k) in s.iterations.iter().enumerate().take(40) {
        println!(
            "{:>7} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.3}",
            k,
            s.mse[i],
            s.err_variance[i],
            s.msr[i],
            s.res_variance[i],
            s.res_variance[i] / s.msr[i]
        );
    }
    Ok(())
}
