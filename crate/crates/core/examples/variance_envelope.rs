//! Compares the Monte-Carlo variance of the SGD iterates against the
//! one-sided envelope obtained by iterating the variance recursion as an
//! equality. The envelope is loose but finite, and it dominates the
//! estimates at every sampled iterate.
//!
//! ```bash
//! cargo run --release --example variance_envelope
//! ```

use morozov::analysis::{ensemble_bias_variance, variance_recursion_envelope};
use morozov::problems::{add_noise, gen_spectral};
use morozov::solvers::{default_c0, StepsizeSchedule};

fn main() -> morozov::Result<()> {
    let problem = gen_spectral(20, 1.0, 0.5, 1.0, 4)?;
    let observation = add_noise(&problem, 1e-2, 9)?;
    let schedule = StepsizeSchedule::new(default_c0(&problem.matrix)?, 0.3)?;
    let k_max = 150;

    let envelope = variance_recursion_envelope(&problem, &observation, &schedule, k_max, 0.0)?;
    let series =
        ensemble_bias_variance(&problem, &observation, &schedule, 2000, k_max, 10, 77)?;

    println!("{:>6} {:>14} {:>14} {:>10}", "k", "mc_variance", "envelope", "ratio");
    for (i, &k) in series.iterations.iter().enumerate() {
        let mc = series.err_variance[i];
        let env = envelope[k - 1];
        println!("{:>6} {:>14.5e} {:>14.5e} {:>10.2e}", k, mc, env, mc / env);
    }
    Ok(())
}
