//! Thin command-line front end over the experiment harness. Each
//! subcommand maps to one harness mode; CSV outputs plus a manifest go to
//! `--out`, and `run` can print a plain-text table instead.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use morozov::harness::{
    config, report, run_bounds, run_decompose, run_dp_vs_idp, run_nontermination, run_table,
    ExperimentSpec, Mode, ProblemKind,
};
use morozov::problems::save_problem;

#[derive(Parser)]
#[command(
    name = "morozov",
    version,
    about = "Discrepancy-principle stopping experiments for SGD on linear inverse problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableMode {
    /// SGD only.
    Dp,
    /// SGD plus the Landweber benchmark.
    Lm,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Table,
}

#[derive(Args)]
struct CommonOpts {
    /// Test problem name (phillips, gravity, shaw, smoothed-phillips,
    /// spectral) or a path to a saved problem [default: phillips].
    #[arg(long)]
    problem: Option<String>,

    /// Discretization size [default: 1000].
    #[arg(long)]
    n: Option<usize>,

    /// Stepsize exponents, comma separated [default: 0.1,0.3,0.5].
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,

    /// Relative noise levels, comma separated [default: 1e-3,5e-3,1e-2,5e-2].
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,

    /// Discrepancy principle constant [default: 1.2].
    #[arg(long)]
    tau: Option<f64>,

    /// Ensemble size per cell [default: 100].
    #[arg(long)]
    runs: Option<usize>,

    /// Master seed; all per-run seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Residual check frequency in iterations [default: 100].
    #[arg(long)]
    freq: Option<usize>,

    /// Iteration budget in epochs (Landweber: iterations) [default: 5000].
    #[arg(long)]
    max_epochs: Option<usize>,

    /// Output directory for CSV files and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format for the `run` subcommand.
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,

    /// Key-value config file; explicit command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Kernel depth of the gravity problem [default: 0.25].
    #[arg(long)]
    d: Option<f64>,

    /// Source exponent of the spectral problem [default: 1].
    #[arg(long)]
    p: Option<f64>,

    /// Singular value decay of the spectral problem [default: 1].
    #[arg(long)]
    decay: Option<f64>,

    /// Source element norm of the spectral problem [default: 1].
    #[arg(long)]
    w_norm: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test problem and write it to disk.
    Generate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Mean error and stopping-epoch table (SGD, optionally vs Landweber).
    Run {
        #[command(flatten)]
        common: CommonOpts,
        /// Whether to include the Landweber benchmark.
        #[arg(long, value_enum, default_value_t = TableMode::Lm)]
        mode: TableMode,
    },
    /// Discrepancy principle versus an independent second run.
    Idp {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Bias-variance decomposition series.
    Decompose {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Closed-form bound sweeps; exits nonzero on any violation.
    Bounds {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Non-termination fractions for large stepsize exponents.
    Nonterm {
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn build_spec(common: &CommonOpts, mode: Mode) -> morozov::Result<ExperimentSpec> {
    // Layering: documented defaults, then the config file, then explicit
    // command-line flags.
    let mut spec = ExperimentSpec {
        mode,
        ..ExperimentSpec::default()
    };
    if let Some(path) = &common.config {
        config::apply_file(&mut spec, path)?;
    }
    if let Some(problem) = &common.problem {
        spec.problem = ProblemKind::parse(problem);
    }
    if let Some(n) = common.n {
        spec.n = n;
    }
    if let Some(alphas) = &common.alpha {
        spec.alphas = alphas.clone();
    }
    if let Some(deltas) = &common.delta {
        spec.deltas = deltas.clone();
    }
    if let Some(tau) = common.tau {
        spec.tau = tau;
    }
    if let Some(runs) = common.runs {
        spec.runs = runs;
    }
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(freq) = common.freq {
        spec.check_frequency = freq;
    }
    if let Some(max_epochs) = common.max_epochs {
        spec.max_epochs = max_epochs;
    }
    if let Some(d) = common.d {
        spec.gravity_depth = d;
    }
    if let Some(p) = common.p {
        spec.spectral.p = p;
    }
    if let Some(decay) = common.decay {
        spec.spectral.decay = decay;
    }
    if let Some(w_norm) = common.w_norm {
        spec.spectral.w_norm = w_norm;
    }
    spec.validate()?;
    Ok(spec)
}

fn emit(
    spec: &ExperimentSpec,
    out: &Option<PathBuf>,
    files: &[(&str, String)],
) -> morozov::Result<()> {
    if let Some(dir) = out {
        let names: Vec<String> = files.iter().map(|(n, _)| n.to_string()).collect();
        for (name, content) in files {
            let path = report::write_output(dir, name, content)?;
            eprintln!("wrote {}", path.display());
        }
        report::write_output(dir, "manifest.json", &report::manifest_json(spec, &names))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> morozov::Result<ExitCode> {
    match cli.command {
        Command::Generate { common } => {
            let spec = build_spec(&common, Mode::Dp)?;
            let problem = spec.build_problem()?;
            let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| morozov::Error::io(dir.as_path(), e))?;
            let stem = dir.join(format!("{}_n{}", problem.name, problem.n()));
            save_problem(&problem, &stem)?;
            println!("{}", stem.with_extension("mtx").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { common, mode } => {
            let mode = match mode {
                TableMode::Dp => Mode::Dp,
                TableMode::Lm => Mode::Lm,
            };
            let spec = build_spec(&common, mode)?;
            let rows = run_table(&spec)?;
            let csv = report::table_csv(&rows);
            match common.format {
                OutputFormat::Table => print!("{}", report::render_table(&rows)),
                OutputFormat::Csv => print!("{csv}"),
            }
            emit(&spec, &common.out, &[("table.csv", csv)])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Idp { common } => {
            let spec = build_spec(&common, Mode::Idp)?;
            let rows = run_dp_vs_idp(&spec)?;
            let csv = report::idp_csv(&rows);
            print!("{csv}");
            emit(&spec, &common.out, &[("idp.csv", csv)])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Decompose { common } => {
            let spec = build_spec(&common, Mode::Decompose)?;
            let cells = run_decompose(&spec)?;
            let csv = report::decompose_csv(&cells);
            for cell in &cells {
                eprintln!(
                    "alpha={} delta={}: {} samples, expected stop {:?}",
                    cell.alpha,
                    cell.delta_rel,
                    cell.series.iterations.len(),
                    cell.expected_stop
                );
            }
            emit(&spec, &common.out, &[("decompose.csv", csv.clone())])?;
            if common.out.is_none() {
                print!("{csv}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds { common } => {
            let spec = build_spec(&common, Mode::Bounds)?;
            let outcome = run_bounds(&spec)?;
            let summary = report::bounds_csv(&outcome);
            print!("{summary}");
            let mut files = vec![("bounds.csv", summary.clone())];
            if !outcome.all_clean() {
                files.push((
                    "bounds_violations.csv",
                    report::bounds_violations_csv(&outcome),
                ));
            }
            emit(&spec, &common.out, &files)?;
            if outcome.all_clean() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("bound violations detected");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Nonterm { common } => {
            let spec = build_spec(&common, Mode::Nonterm)?;
            let rows = run_nontermination(&spec)?;
            let csv = report::nonterm_csv(&rows);
            print!("{csv}");
            emit(&spec, &common.out, &[("nonterm.csv", csv)])?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
