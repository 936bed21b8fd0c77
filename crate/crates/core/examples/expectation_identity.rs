//! The mean SGD iterate satisfies an exact Landweber-type recursion with
//! diminishing steps. This example verifies the identity three ways on a
//! tiny system: exhaustive enumeration over all index sequences, the
//! deterministic recursion, and a Monte-Carlo sample mean.
//!
//! ```bash
//! cargo run --release --example expectation_identity
//! ```

use morozov::analysis::enumerate_expected_iterate;
use morozov::linalg::{self, Matrix};
use morozov::problems::{add_noise, InverseProblem};
use morozov::rng::{derive_seed, tags, Rng};
use morozov::solvers::{
    default_c0, expected_sgd_trajectory, run_sgd, RecorderSpec, SgdConfig, StepsizeSchedule,
    StoppingRule,
};

fn main() -> morozov::Result<()> {
    let mut rng = Rng::new(2024);
    let matrix = Matrix::from_fn(3, 2, |_, _| rng.next_standard_normal());
    let x_true = vec![1.0, -0.5];
    let y_true = matrix.matvec(&x_true)?;
    let problem = InverseProblem::new("toy", matrix, x_true, y_true, Default::default())?;
    let observation = add_noise(&problem, 0.1, 11)?;
    let schedule = StepsizeSchedule::new(default_c0(&problem.matrix)?, 0.4)?;
    let k = 5;

    let by_enumeration = enumerate_expected_iterate(&problem, &observation, &schedule, k)?;
    let by_recursion = expected_sgd_trajectory(&problem, &observation, &schedule, k)?[k - 1].clone();

    let n_runs = 200_000;
    let mut mean = vec![0.0; problem.m()];
    for run in 0..n_runs {
        let config = SgdConfig::new(schedule, derive_seed(5, &[tags::SGD, run]), k);
        let out = run_sgd(
            &config,
            &problem,
            &observation,
            &StoppingRule::FixedIndex(k),
            &RecorderSpec::default(),
        )?;
        linalg::axpy(1.0 / n_runs as f64, &out.x_final, &mut mean);
    }

    println!("mean iterate at k = {k}:");
    println!("  enumeration: {by_enumeration:?}");
    println!("  recursion:   {by_recursion:?}");
    println!("  monte-carlo: {mean:?}");
    println!(
        "enumeration vs recursion: {:.3e} (exact up to round-off)",
        linalg::dist(&by_enumeration, &by_recursion)
    );
    println!(
        "monte-carlo vs recursion: {:.3e} (O(1/sqrt(runs)))",
        linalg::dist(&mean, &by_recursion)
    );
    Ok(())
}
