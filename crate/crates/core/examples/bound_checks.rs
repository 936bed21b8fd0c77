//! Sweeps the closed-form estimates used by the stopping theory: the
//! spectral filter product bound, the stepsize sum bounds, the
//! mean-iteration decay and stop-index bounds on problems with a known
//! source representation, and the pathwise noise-propagation estimates.
//!
//! ```bash
//! cargo run --release --example bound_checks
//! ```

use morozov::harness::{run_bounds, ExperimentSpec, Mode};

fn main() -> morozov::Result<()> {
    let spec = ExperimentSpec {
        mode: Mode::Bounds,
        ..ExperimentSpec::default()
    };
    let outcome = run_bounds(&spec)?;
    println!(
        "{:<18} {:>10} {:>12} {:>12}",
        "sweep", "cases", "violations", "max_ratio"
    );
    for (name, report) in &outcome.reports {
        println!(
            "{:<18} {:>10} {:>12} {:>12.6}",
            name,
            report.checked_cases,
            report.violations.len(),
            report.max_ratio
        );
    }
    if outcome.all_clean() {
        println!("\nall bounds hold.");
        Ok(())
    } else {
        for (name, report) in &outcome.reports {
            for v in &report.violations {
                eprintln!("{name}: {} (lhs {} > rhs {})", v.label, v.lhs, v.rhs);
            }
        }
        Err(morozov::Error::Refused("bound violations".into()))
    }
}
