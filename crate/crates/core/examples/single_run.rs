//! One SGD run on a noisy Fredholm problem, stopped by the discrepancy
//! principle, with the recorded residual/error path printed along the way.
//!
//! ```bash
//! cargo run --release --example single_run
//! ```

use morozov::problems::{add_noise, gen_phillips};
use morozov::solvers::{
    default_c0, run_sgd, RecorderSpec, SgdConfig, StepsizeSchedule, StoppingRule,
};
use morozov::stopping::DiscrepancyRule;

fn main() -> morozov::Result<()> {
    let problem = gen_phillips(200)?;
    let observation = add_noise(&problem, 1e-2, 42)?;
    println!(
        "problem {} ({}x{}), noise ||y' - y|| = {:.4e}",
        problem.name,
        problem.n(),
        problem.m(),
        observation.delta_abs
    );

    let schedule = StepsizeSchedule::new(default_c0(&problem.matrix)?, 0.1)?;
    let budget = 5000 * problem.n();
    let rule = DiscrepancyRule::new(1.2, observation.delta_abs, 100, budget)?;
    let config = SgdConfig::new(schedule, 7, budget);
    let recorder = RecorderSpec {
        cadence: Some(100),
        record_error: true,
        keep_index_trace: false,
    };

    let outcome = run_sgd(
        &config,
        &problem,
        &observation,
        &StoppingRule::Discrepancy(rule),
        &recorder,
    )?;

    println!("threshold tau*delta = {:.4e}", 1.2 * observation.delta_abs);
    for sample in &outcome.recorded {
        println!(
            "k = {:6}  residual = {:.4e}  error = {:.4e}",
            sample.iteration,
            sample.residual_norm,
            sample.error_norm.unwrap_or(f64::NAN)
        );
    }
    println!(
        "stopped: {:?} at iterate {} ({:.3} epochs)",
        outcome.stop_reason,
        outcome.final_iteration,
        outcome.epochs(problem.n())
    );
    Ok(())
}
