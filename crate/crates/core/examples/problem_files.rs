//! Generates the four Fredholm test problems plus the synthetic diagonal
//! one, saves each as a MatrixMarket array file with a JSON sidecar, and
//! loads them back (the round trip is bit-exact).
//!
//! ```bash
//! cargo run --release --example problem_files
//! ```

use morozov::linalg;
use morozov::problems::{
    gen_gravity, gen_phillips, gen_shaw, gen_smoothed_phillips, gen_spectral, load_problem,
    save_problem,
};

fn main() -> morozov::Result<()> {
    let dir = std::env::temp_dir().join("morozov_problems");
    std::fs::create_dir_all(&dir).map_err(|e| morozov::Error::io(&dir, e))?;
    let problems = vec![
        gen_phillips(100)?,
        gen_gravity(100, 0.25)?,
        gen_shaw(100)?,
        gen_smoothed_phillips(100)?,
        gen_spectral(50, 1.0, 1.0, 1.0, 7)?,
    ];
    println!(
        "{:<20} {:>5} {:>12} {:>12} {:>12}",
        "name", "n", "||A||", "||x||", "||y||"
    );
    for problem in &problems {
        println!(
            "{:<20} {:>5} {:>12.4e} {:>12.4e} {:>12.4e}",
            problem.name,
            problem.n(),
            problem.operator_norm(),
            linalg::norm(&problem.x_true),
            linalg::norm(&problem.y_true),
        );
        let stem = dir.join(format!("{}_n{}", problem.name, problem.n()));
        save_problem(problem, &stem)?;
        let loaded = load_problem(&stem)?;
        assert_eq!(problem, &loaded);
        println!("  -> {} (+ .json), round trip exact", stem.with_extension("mtx").display());
    }
    Ok(())
}
