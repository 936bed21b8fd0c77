//! Reproducible ensemble experiments: mean-error/stopping-epoch tables with
//! a Landweber benchmark, the independent-run comparison, bias–variance
//! series, bound sweeps, and the non-termination study.
//!
//! All randomness is derived from one master seed: the run with index `r`
//! of the cell `(alpha_i, delta_j)` draws its noise realization from
//! `derive_seed(master, [NOISE, i, j, r])` and its row indices from
//! `derive_seed(master, [SGD, i, j, r])`. Ensemble members may execute in
//! parallel; aggregation is ordered by run index, so outputs are
//! byte-identical across schedules.

pub mod config;
pub mod report;

use std::path::PathBuf;

use rayon::prelude::*;

use crate::analysis::{
    self, check_pathwise_noise, check_sum_bounds, product_bound_from_spectrum,
    BiasVarianceSeries, BoundReport,
};
use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen, sym_eigenvalues, Matrix};
use crate::problems::{
    add_noise, add_noise_exact_norm, gen_gravity, gen_phillips, gen_shaw, gen_smoothed_phillips,
    gen_spectral, load_problem, InverseProblem, NoisyObservation,
};
use crate::rng::{derive_seed, tags, Rng};
use crate::solvers::{
    default_c0, run_landweber, run_sgd, RecorderSpec, RunOutcome, SgdConfig, StepsizeSchedule,
    StopReason, StoppingRule,
};
use crate::stopping::{landweber_stop_index_bound, DiscrepancyRule};

/// Master seed used when none is given, so published outputs reproduce.
pub const DEFAULT_MASTER_SEED: u64 = 0x5EED_CAFE;

/// Which test problem an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Phillips,
    Gravity,
    Shaw,
    SmoothedPhillips,
    Spectral,
    File(PathBuf),
}

impl ProblemKind {
    /// Parses a problem name; anything that is not a known name is treated
    /// as a path to a saved problem.
    pub fn parse(text: &str) -> ProblemKind {
        match text.to_lowercase().replace('_', "-").as_str() {
            "phillips" => ProblemKind::Phillips,
            "gravity" => ProblemKind::Gravity,
            "shaw" => ProblemKind::Shaw,
            "smoothed-phillips" => ProblemKind::SmoothedPhillips,
            "spectral" => ProblemKind::Spectral,
            _ => ProblemKind::File(PathBuf::from(text)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ProblemKind::Phillips => "phillips".into(),
            ProblemKind::Gravity => "gravity".into(),
            ProblemKind::Shaw => "shaw".into(),
            ProblemKind::SmoothedPhillips => "smoothed-phillips".into(),
            ProblemKind::Spectral => "spectral".into(),
            ProblemKind::File(p) => p.display().to_string(),
        }
    }
}

/// Experiment mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// SGD alone, stopped by the discrepancy principle.
    Dp,
    /// SGD plus the Landweber benchmark on the same observations.
    Lm,
    /// Discrepancy principle versus an independent second run.
    Idp,
    /// Bias–variance decomposition series.
    Decompose,
    /// Closed-form bound sweeps.
    Bounds,
    /// Non-termination fractions (large stepsize exponents).
    Nonterm,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Dp => "dp",
            Mode::Lm => "lm",
            Mode::Idp => "idp",
            Mode::Decompose => "decompose",
            Mode::Bounds => "bounds",
            Mode::Nonterm => "nonterm",
        }
    }
}

/// Parameters of the synthetic diagonal problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    pub p: f64,
    pub decay: f64,
    pub w_norm: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            p: 1.0,
            decay: 1.0,
            w_norm: 1.0,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemKind,
    pub n: usize,
    pub gravity_depth: f64,
    pub spectral: SpectralParams,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub tau: f64,
    pub runs: usize,
    pub master_seed: u64,
    pub check_frequency: usize,
    pub max_epochs: usize,
    pub mode: Mode,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            problem: ProblemKind::Phillips,
            n: 1000,
            gravity_depth: 0.25,
            spectral: SpectralParams::default(),
            alphas: vec![0.1, 0.3, 0.5],
            deltas: vec![1e-3, 5e-3, 1e-2, 5e-2],
            tau: 1.2,
            runs: 100,
            master_seed: DEFAULT_MASTER_SEED,
            check_frequency: 100,
            max_epochs: 5000,
            mode: Mode::Lm,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max-epochs must be >= 1".into()));
        }
        if self.check_frequency < 1 {
            return Err(Error::Config("check frequency must be >= 1".into()));
        }
        if !(self.tau > 1.0) {
            return Err(Error::Config(format!("tau must be > 1, got {}", self.tau)));
        }
        if self.alphas.is_empty() || self.deltas.is_empty() {
            return Err(Error::Config("alpha and delta lists must be nonempty".into()));
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        Ok(())
    }

    /// Instantiates the problem the spec refers to.
    pub fn build_problem(&self) -> Result<InverseProblem> {
        match &self.problem {
            ProblemKind::Phillips => gen_phillips(self.n),
            ProblemKind::Gravity => gen_gravity(self.n, self.gravity_depth),
            ProblemKind::Shaw => gen_shaw(self.n),
            ProblemKind::SmoothedPhillips => gen_smoothed_phillips(self.n),
            ProblemKind::Spectral => gen_spectral(
                self.n,
                self.spectral.p,
                self.spectral.decay,
                self.spectral.w_norm,
                derive_seed(self.master_seed, &[tags::PROBLEM]),
            ),
            ProblemKind::File(path) => load_problem(path),
        }
    }

    fn noise_seed(&self, alpha_idx: usize, delta_idx: usize, run: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[tags::NOISE, alpha_idx as u64, delta_idx as u64, run as u64],
        )
    }

    fn sgd_seed(&self, alpha_idx: usize, delta_idx: usize, run: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[tags::SGD, alpha_idx as u64, delta_idx as u64, run as u64],
        )
    }

    fn independent_seed(&self, alpha_idx: usize, delta_idx: usize, run: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[
                tags::INDEPENDENT,
                alpha_idx as u64,
                delta_idx as u64,
                run as u64,
            ],
        )
    }
}

/// The Landweber benchmark stepsize `1 / ||A||_F^2`. The squared Frobenius
/// norm dominates the squared spectral norm, so the contraction condition
/// holds with margin; this conservative choice reproduces the benchmark
/// stopping indices the tables are calibrated against.
pub fn landweber_step(problem: &InverseProblem) -> f64 {
    let f = problem.matrix.frobenius_norm();
    1.0 / (f * f)
}

/// One aggregated table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub alpha: f64,
    pub delta_rel: f64,
    /// Mean squared error of the SGD iterate at its stopping index.
    pub e_sgd: f64,
    /// Population standard deviation of the squared error.
    pub std_e_sgd: f64,
    /// Mean stopping index in epochs.
    pub k_sgd: f64,
    pub e_lm: Option<f64>,
    /// Mean Landweber stopping index in iterations.
    pub k_lm: Option<f64>,
    pub n_exhausted: usize,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean error and stopping-epoch table over the `(alpha, delta)` grid.
/// In [`Mode::Lm`] every observation is additionally solved by the
/// Landweber benchmark.
pub fn run_table(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if !matches!(spec.mode, Mode::Dp | Mode::Lm) {
        return Err(Error::Config(format!(
            "run_table requires mode dp or lm, got {}",
            spec.mode.label()
        )));
    }
    let problem = spec.build_problem()?;
    let with_lm = spec.mode == Mode::Lm;
    let lm_step = with_lm.then(|| landweber_step(&problem));
    let c0 = default_c0(&problem.matrix)?;
    let budget = spec
        .max_epochs
        .checked_mul(problem.n())
        .ok_or_else(|| Error::Config("iteration budget overflows".into()))?;
    let mut rows = Vec::new();
    for (ai, &alpha) in spec.alphas.iter().enumerate() {
        let schedule = StepsizeSchedule::new(c0, alpha)?;
        for (di, &delta_rel) in spec.deltas.iter().enumerate() {
            struct CellRun {
                err: f64,
                epochs: f64,
                exhausted: bool,
                lm_err: Option<f64>,
                lm_iters: Option<f64>,
            }
            let outcomes: Vec<Result<CellRun>> = (0..spec.runs)
                .into_par_iter()
                .map(|run| {
                    let obs = add_noise(&problem, delta_rel, spec.noise_seed(ai, di, run))?;
                    let rule = DiscrepancyRule::new(
                        spec.tau,
                        obs.delta_abs,
                        spec.check_frequency,
                        budget,
                    )?;
                    let config = SgdConfig::new(schedule, spec.sgd_seed(ai, di, run), budget);
                    let out = run_sgd(
                        &config,
                        &problem,
                        &obs,
                        &StoppingRule::Discrepancy(rule),
                        &RecorderSpec::default(),
                    )?;
                    let (lm_err, lm_iters) = match lm_step {
                        Some(step) => {
                            let lm_rule = DiscrepancyRule::new(
                                spec.tau,
                                obs.delta_abs,
                                1,
                                spec.max_epochs,
                            )?;
                            let lm = run_landweber(&problem, &obs, step, &lm_rule)?;
                            (
                                Some(linalg::dist_sq(&lm.x_final, &problem.x_true)),
                                Some(lm.final_iteration as f64),
                            )
                        }
                        None => (None, None),
                    };
                    Ok(CellRun {
                        err: linalg::dist_sq(&out.x_final, &problem.x_true),
                        epochs: out.epochs(problem.n()),
                        exhausted: out.stop_reason == StopReason::BudgetExhausted,
                        lm_err,
                        lm_iters,
                    })
                })
                .collect();
            let mut errs = Vec::with_capacity(spec.runs);
            let mut epochs = Vec::with_capacity(spec.runs);
            let mut lm_errs = Vec::new();
            let mut lm_iters = Vec::new();
            let mut n_exhausted = 0;
            for outcome in outcomes {
                let o = outcome?;
                errs.push(o.err);
                epochs.push(o.epochs);
                if o.exhausted {
                    n_exhausted += 1;
                }
                if let (Some(e), Some(k)) = (o.lm_err, o.lm_iters) {
                    lm_errs.push(e);
                    lm_iters.push(k);
                }
            }
            let (e_sgd, std_e_sgd) = mean_and_std(&errs);
            let (k_sgd, _) = mean_and_std(&epochs);
            let (e_lm, k_lm) = if with_lm {
                (Some(mean_and_std(&lm_errs).0), Some(mean_and_std(&lm_iters).0))
            } else {
                (None, None)
            };
            rows.push(ResultRow {
                problem: problem.name.clone(),
                alpha,
                delta_rel,
                e_sgd,
                std_e_sgd,
                k_sgd,
                e_lm,
                k_lm,
                n_exhausted,
            });
        }
    }
    Ok(rows)
}

/// One aggregated cell of the independent-run comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct IdpRow {
    pub problem: String,
    pub alpha: f64,
    pub delta_rel: f64,
    pub dp_mean: f64,
    pub dp_std: f64,
    pub idp_mean: f64,
    pub idp_std: f64,
    pub n_exhausted: usize,
}

/// For each run: a first SGD pass determines the stopping index, a second
/// pass with an independent index stream on the same observation is
/// evaluated at that index.
pub fn run_dp_vs_idp(spec: &ExperimentSpec) -> Result<Vec<IdpRow>> {
    spec.validate()?;
    if spec.mode != Mode::Idp {
        return Err(Error::Config(format!(
            "run_dp_vs_idp requires mode idp, got {}",
            spec.mode.label()
        )));
    }
    let problem = spec.build_problem()?;
    let c0 = default_c0(&problem.matrix)?;
    let budget = spec.max_epochs * problem.n();
    let mut rows = Vec::new();
    for (ai, &alpha) in spec.alphas.iter().enumerate() {
        let schedule = StepsizeSchedule::new(c0, alpha)?;
        for (di, &delta_rel) in spec.deltas.iter().enumerate() {
            let outcomes: Vec<Result<(f64, f64, bool)>> = (0..spec.runs)
                .into_par_iter()
                .map(|run| {
                    let obs = add_noise(&problem, delta_rel, spec.noise_seed(ai, di, run))?;
                    let rule = DiscrepancyRule::new(
                        spec.tau,
                        obs.delta_abs,
                        spec.check_frequency,
                        budget,
                    )?;
                    let config = SgdConfig::new(schedule, spec.sgd_seed(ai, di, run), budget);
                    let first = run_sgd(
                        &config,
                        &problem,
                        &obs,
                        &StoppingRule::Discrepancy(rule),
                        &RecorderSpec::default(),
                    )?;
                    let stop_index = first.final_iteration;
                    let second_config = SgdConfig::new(
                        schedule,
                        spec.independent_seed(ai, di, run),
                        stop_index,
                    );
                    let second = run_sgd(
                        &second_config,
                        &problem,
                        &obs,
                        &StoppingRule::FixedIndex(stop_index),
                        &RecorderSpec::default(),
                    )?;
                    Ok((
                        linalg::dist_sq(&first.x_final, &problem.x_true),
                        linalg::dist_sq(&second.x_final, &problem.x_true),
                        first.stop_reason == StopReason::BudgetExhausted,
                    ))
                })
                .collect();
            let mut dp = Vec::with_capacity(spec.runs);
            let mut idp = Vec::with_capacity(spec.runs);
            let mut n_exhausted = 0;
            for o in outcomes {
                let (a, b, exhausted) = o?;
                dp.push(a);
                idp.push(b);
                if exhausted {
                    n_exhausted += 1;
                }
            }
            let (dp_mean, dp_std) = mean_and_std(&dp);
            let (idp_mean, idp_std) = mean_and_std(&idp);
            rows.push(IdpRow {
                problem: problem.name.clone(),
                alpha,
                delta_rel,
                dp_mean,
                dp_std,
                idp_mean,
                idp_std,
                n_exhausted,
            });
        }
    }
    Ok(rows)
}

/// Bias–variance series of one `(alpha, delta)` cell.
#[derive(Debug, Clone)]
pub struct DecomposeCell {
    pub problem: String,
    pub alpha: f64,
    pub delta_rel: f64,
    pub series: BiasVarianceSeries,
    /// Discrepancy-principle index of the exact mean iteration (`tau` from
    /// the spec), when reached within the horizon.
    pub expected_stop: Option<usize>,
}

/// Sampling cadence of the decomposition series, in iterations.
pub const DECOMPOSE_CADENCE: usize = 50;
/// Horizon of the decomposition series, in epochs.
pub const DECOMPOSE_EPOCHS: usize = 100;

/// Bias–variance decomposition over the `(alpha, delta)` grid. Unlike the
/// tables, each cell fixes a single noise realization (run index 0) and the
/// ensemble varies only the sampled row indices.
pub fn run_decompose(spec: &ExperimentSpec) -> Result<Vec<DecomposeCell>> {
    spec.validate()?;
    if spec.mode != Mode::Decompose {
        return Err(Error::Config(format!(
            "run_decompose requires mode decompose, got {}",
            spec.mode.label()
        )));
    }
    if spec.runs < 2 {
        return Err(Error::Config("decompose needs at least 2 runs".into()));
    }
    let problem = spec.build_problem()?;
    let c0 = default_c0(&problem.matrix)?;
    let k_max = DECOMPOSE_EPOCHS * problem.n();
    // One decomposition of AᵀA/n drives the mean iteration in every cell;
    // for symmetric problems it doubles as the residual-side operator.
    let dec_b = sym_eigen(&problem.normal_matrix())?;
    let dec_g = if problem.matrix.is_square() && problem.matrix.symmetry_gap() == 0.0 {
        dec_b.clone()
    } else {
        let mut scaled = problem.row_gram().clone();
        scaled.scale(1.0 / problem.n() as f64);
        sym_eigen(&scaled)?
    };
    let mut cells = Vec::new();
    for (ai, &alpha) in spec.alphas.iter().enumerate() {
        let schedule = StepsizeSchedule::new(c0, alpha)?;
        for (di, &delta_rel) in spec.deltas.iter().enumerate() {
            let obs = add_noise(&problem, delta_rel, spec.noise_seed(ai, di, 0))?;
            let series = analysis::ensemble_bias_variance_with(
                &dec_b,
                &problem,
                &obs,
                &schedule,
                spec.runs,
                k_max,
                DECOMPOSE_CADENCE,
                derive_seed(spec.master_seed, &[tags::SGD, ai as u64, di as u64]),
            )?;
            let expected_stop =
                analysis::expected_stop_index_with(&dec_g, &obs, spec.tau, &schedule, k_max)?;
            cells.push(DecomposeCell {
                problem: problem.name.clone(),
                alpha,
                delta_rel,
                series,
                expected_stop,
            });
        }
    }
    Ok(cells)
}

/// Named bound sweeps with their reports.
#[derive(Debug)]
pub struct BoundsOutcome {
    pub reports: Vec<(String, BoundReport)>,
}

impl BoundsOutcome {
    pub fn all_clean(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.is_clean())
    }
}

/// Executes the documented bound sweeps: the spectral filter product bound
/// on random PSD matrices, the stepsize sum bounds, the mean-iteration
/// decay bound and stop-index bound on synthetic spectral problems, and the
/// pathwise noise-propagation estimates on a mid-size smooth problem.
pub fn run_bounds(spec: &ExperimentSpec) -> Result<BoundsOutcome> {
    let mut reports = Vec::new();

    // Spectral filter product bound on random PSD matrices.
    let mut product = BoundReport::new();
    let mut rng = Rng::new(derive_seed(spec.master_seed, &[tags::PROBLEM, 1]));
    for trial in 0..100u64 {
        let dim = 2 + (rng.next_index(19));
        let factor = Matrix::from_fn(dim, dim, |_, _| rng.next_standard_normal());
        let psd = factor.gram();
        let eigs = sym_eigenvalues(&psd)?;
        let lmax = eigs[0].max(f64::MIN_POSITIVE);
        for &alpha in &[0.1, 0.5] {
            let schedule = StepsizeSchedule::new(1.0 / lmax, alpha)?;
            for &p in &[0.0, 0.5, 1.0, 2.0] {
                for &k in &[1usize, 2, 5, 13, 34, 89, 200] {
                    for &j in &[1, k.div_ceil(2), k] {
                        let case = product_bound_from_spectrum(&eigs, &schedule, j, k, p)?;
                        product.record(case.lhs, case.rhs, || {
                            format!("trial={trial} dim={dim} {}", case.label)
                        });
                    }
                }
            }
        }
    }
    reports.push(("filter-product".to_string(), product));

    // Stepsize sum bounds.
    let mut sums = BoundReport::new();
    for &alpha in &[0.1, 0.3, 0.5] {
        for &beta in &[0.0, 0.5, 1.0] {
            for &r in &[0.5, 1.0, 2.0] {
                for &k in &[16usize, 256, 4096, 10_000] {
                    for case in check_sum_bounds(alpha, beta, r, k, 1.0)? {
                        sums.record_case(&case);
                    }
                }
            }
        }
    }
    reports.push(("stepsize-sums".to_string(), sums));

    // Mean-iteration decay bound and stop-index bound on spectral problems
    // with known source representation.
    let mut decay = BoundReport::new();
    let mut stop_index = BoundReport::new();
    for (pi, &p) in [0.25, 0.5, 1.0, 2.0].iter().enumerate() {
        let problem = gen_spectral(
            10,
            p,
            0.5,
            1.0,
            derive_seed(spec.master_seed, &[tags::PROBLEM, 2, pi as u64]),
        )?;
        let c0 = default_c0(&problem.matrix)?;
        for &alpha in &[0.1, 0.3, 0.5] {
            let schedule = StepsizeSchedule::new(c0, alpha)?;
            for s in [0.0, 0.5] {
                let (_, report) = analysis::check_decay_rate(&problem, &schedule, 10_000, s)?;
                decay.merge(report);
            }
            for (qi, &delta_abs) in [1e-2, 1e-3, 1e-4].iter().enumerate() {
                let obs = add_noise_exact_norm(
                    &problem,
                    delta_abs,
                    derive_seed(spec.master_seed, &[tags::NOISE, 3, pi as u64, qi as u64]),
                )?;
                let kstar = analysis::expected_stop_index(
                    &problem,
                    &obs,
                    spec.tau,
                    &schedule,
                    50_000_000,
                )?
                .ok_or_else(|| {
                    Error::Refused(format!(
                        "mean iteration did not reach the threshold (p={p}, alpha={alpha}, delta={delta_abs})"
                    ))
                })?;
                let bound = landweber_stop_index_bound(
                    obs.delta_abs,
                    spec.tau,
                    problem.n(),
                    p,
                    alpha,
                    c0,
                    problem.param("w_norm").unwrap_or(1.0),
                )?;
                stop_index.record(kstar as f64, bound, || {
                    format!("stop-index p={p} alpha={alpha} delta={delta_abs}")
                });
            }
        }
    }
    reports.push(("mean-decay".to_string(), decay));
    reports.push(("mean-stop-index".to_string(), stop_index));

    // Pathwise noise propagation on a mid-size smooth problem.
    let mut pathwise = BoundReport::new();
    let problem = gen_phillips(200)?;
    let c0 = default_c0(&problem.matrix)?;
    let schedule = StepsizeSchedule::new(c0, 0.3)?;
    for (qi, &delta_rel) in [1e-2, 5e-2].iter().enumerate() {
        for run in 0..100usize {
            let obs = add_noise(
                &problem,
                delta_rel,
                derive_seed(spec.master_seed, &[tags::NOISE, 4, qi as u64, run as u64]),
            )?;
            let seed = derive_seed(spec.master_seed, &[tags::SGD, 4, qi as u64, run as u64]);
            let report =
                check_pathwise_noise(&problem, &obs, &schedule, seed, 10 * problem.n())?;
            pathwise.merge(report);
        }
    }
    reports.push(("pathwise-noise".to_string(), pathwise));

    Ok(BoundsOutcome { reports })
}

/// One cell of the non-termination study.
#[derive(Debug, Clone, PartialEq)]
pub struct NontermRow {
    pub problem: String,
    pub alpha: f64,
    pub delta_rel: f64,
    pub runs: usize,
    pub n_exhausted: usize,
    pub fraction: f64,
}

/// Fraction of runs whose budget runs out before the discrepancy principle
/// fires. Intended for stepsize exponents above one, where the iteration
/// freezes before reaching the threshold; exponents below one are allowed
/// for contrast.
pub fn run_nontermination(spec: &ExperimentSpec) -> Result<Vec<NontermRow>> {
    spec.validate()?;
    if spec.mode != Mode::Nonterm {
        return Err(Error::Config(format!(
            "run_nontermination requires mode nonterm, got {}",
            spec.mode.label()
        )));
    }
    let problem = spec.build_problem()?;
    if !spec.alphas.iter().any(|&a| a > 1.0) {
        log::warn!("non-termination study without any alpha > 1");
    }
    // The effect needs rank(A) >= 2 and nonzero exact data.
    let eigs = sym_eigenvalues(&problem.matrix.gram())?;
    let rank = eigs.iter().filter(|&&l| l > 1e-24 * eigs[0].max(1e-300)).count();
    if rank < 2 || linalg::norm(&problem.y_true) == 0.0 {
        log::warn!(
            "problem '{}' has rank {rank} and ||y|| = {}; the non-termination effect needs \
             rank >= 2 and nonzero data",
            problem.name,
            linalg::norm(&problem.y_true)
        );
    }
    let c0 = default_c0(&problem.matrix)?;
    let budget = spec.max_epochs * problem.n();
    let mut rows = Vec::new();
    for (ai, &alpha) in spec.alphas.iter().enumerate() {
        let schedule = StepsizeSchedule::new(c0, alpha)?;
        for (di, &delta_rel) in spec.deltas.iter().enumerate() {
            let exhausted: Vec<Result<bool>> = (0..spec.runs)
                .into_par_iter()
                .map(|run| {
                    let obs = add_noise(&problem, delta_rel, spec.noise_seed(ai, di, run))?;
                    let rule = DiscrepancyRule::new(
                        spec.tau,
                        obs.delta_abs,
                        spec.check_frequency,
                        budget,
                    )?;
                    let config = SgdConfig::new(schedule, spec.sgd_seed(ai, di, run), budget);
                    let out = run_sgd(
                        &config,
                        &problem,
                        &obs,
                        &StoppingRule::Discrepancy(rule),
                        &RecorderSpec::default(),
                    )?;
                    Ok(out.stop_reason == StopReason::BudgetExhausted)
                })
                .collect();
            let mut n_exhausted = 0;
            for e in exhausted {
                if e? {
                    n_exhausted += 1;
                }
            }
            rows.push(NontermRow {
                problem: problem.name.clone(),
                alpha,
                delta_rel,
                runs: spec.runs,
                n_exhausted,
                fraction: n_exhausted as f64 / spec.runs as f64,
            });
        }
    }
    Ok(rows)
}

/// Runs one SGD pass and returns the outcome; exposed for the examples.
pub fn single_dp_run(
    spec: &ExperimentSpec,
    problem: &InverseProblem,
    alpha: f64,
    delta_rel: f64,
    run: usize,
) -> Result<(NoisyObservation, RunOutcome)> {
    let c0 = default_c0(&problem.matrix)?;
    let schedule = StepsizeSchedule::new(c0, alpha)?;
    let budget = spec.max_epochs * problem.n();
    let obs = add_noise(problem, delta_rel, spec.noise_seed(0, 0, run))?;
    let rule = DiscrepancyRule::new(spec.tau, obs.delta_abs, spec.check_frequency, budget)?;
    let config = SgdConfig::new(schedule, spec.sgd_seed(0, 0, run), budget);
    let out = run_sgd(
        &config,
        problem,
        &obs,
        &StoppingRule::Discrepancy(rule),
        &RecorderSpec {
            cadence: Some(spec.check_frequency),
            record_error: true,
            keep_index_trace: false,
        },
    )?;
    Ok((obs, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(mode: Mode) -> ExperimentSpec {
        ExperimentSpec {
            problem: ProblemKind::Gravity,
            n: 24,
            alphas: vec![0.1, 0.5],
            deltas: vec![1e-2, 5e-2],
            runs: 8,
            check_frequency: 10,
            max_epochs: 200,
            mode,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn table_runs_and_is_deterministic() {
        let spec = small_spec(Mode::Lm);
        let rows1 = run_table(&spec).unwrap();
        let rows2 = run_table(&spec).unwrap();
        assert_eq!(rows1, rows2);
        assert_eq!(rows1.len(), 4);
        for row in &rows1 {
            assert!(row.e_sgd >= 0.0);
            assert!(row.k_sgd <= spec.max_epochs as f64);
            assert!(row.e_lm.is_some());
        }
        // A different master seed changes the outcomes.
        let mut other = spec.clone();
        other.master_seed ^= 1;
        assert_ne!(run_table(&other).unwrap(), rows1);
        // Errors grow with the noise level for fixed alpha.
        for a in 0..2 {
            assert!(rows1[2 * a].e_sgd <= rows1[2 * a + 1].e_sgd * 1.5);
        }
    }

    #[test]
    fn dp_mode_omits_landweber() {
        let spec = small_spec(Mode::Dp);
        let rows = run_table(&spec).unwrap();
        assert!(rows.iter().all(|r| r.e_lm.is_none() && r.k_lm.is_none()));
    }

    #[test]
    fn idp_runs_and_single_row_is_degenerate() {
        let spec = ExperimentSpec {
            deltas: vec![1e-2],
            alphas: vec![0.3],
            ..small_spec(Mode::Idp)
        };
        let rows = run_dp_vs_idp(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].dp_mean >= 0.0 && rows[0].idp_mean >= 0.0);
    }

    #[test]
    fn decompose_produces_series_with_reference_level() {
        let spec = ExperimentSpec {
            alphas: vec![0.1],
            deltas: vec![5e-2],
            runs: 12,
            max_epochs: 2000,
            ..small_spec(Mode::Decompose)
        };
        let cells = run_decompose(&spec).unwrap();
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        assert!(cell.series.delta_sq > 0.0);
        assert!(!cell.series.iterations.is_empty());
        assert!(cell.expected_stop.is_some());
    }

    #[test]
    fn nonterm_fraction_is_one_with_tiny_budget() {
        let spec = ExperimentSpec {
            problem: ProblemKind::Spectral,
            n: 3,
            alphas: vec![1.5],
            deltas: vec![1e-3],
            runs: 10,
            max_epochs: 1,
            check_frequency: 1,
            mode: Mode::Nonterm,
            ..ExperimentSpec::default()
        };
        // One epoch of a rank-3 problem cannot reach the threshold.
        let rows = run_nontermination(&spec).unwrap();
        assert_eq!(rows[0].fraction, 1.0);
    }

    #[test]
    fn exact_zero_solution_stops_at_first_iterate() {
        // Noise-free problem whose solution is the zero start: the error is
        // zero and the run stops at iterate 1, i.e. 1/n epochs.
        let dir = tempfile::tempdir().unwrap();
        let trivial = InverseProblem::new(
            "trivial",
            Matrix::identity(4),
            vec![0.0; 4],
            vec![0.0; 4],
            Default::default(),
        )
        .unwrap();
        let stem = dir.path().join("trivial");
        crate::problems::save_problem(&trivial, &stem).unwrap();
        let spec = ExperimentSpec {
            problem: ProblemKind::File(stem),
            alphas: vec![0.5],
            deltas: vec![0.0],
            runs: 1,
            mode: Mode::Dp,
            ..ExperimentSpec::default()
        };
        let rows = run_table(&spec).unwrap();
        assert_eq!(rows[0].e_sgd, 0.0);
        assert_eq!(rows[0].k_sgd, 0.25);
        assert_eq!(rows[0].n_exhausted, 0);
    }

    #[test]
    fn single_row_system_makes_both_variants_identical() {
        // One data row: the index stream is constant, so the independent
        // second run retraces the first exactly.
        let dir = tempfile::tempdir().unwrap();
        let a = Matrix::from_row_major(1, 2, vec![2.0, 1.0]).unwrap();
        let single =
            InverseProblem::new("row", a, vec![1.0, 1.0], vec![3.0], Default::default()).unwrap();
        let stem = dir.path().join("row");
        crate::problems::save_problem(&single, &stem).unwrap();
        let spec = ExperimentSpec {
            problem: ProblemKind::File(stem),
            alphas: vec![0.3],
            deltas: vec![1e-2],
            runs: 5,
            check_frequency: 1,
            max_epochs: 10_000,
            mode: Mode::Idp,
            ..ExperimentSpec::default()
        };
        let rows = run_dp_vs_idp(&spec).unwrap();
        assert_eq!(rows[0].dp_mean, rows[0].idp_mean);
        assert_eq!(rows[0].dp_std, rows[0].idp_std);
    }

    #[test]
    fn spec_validation_and_problem_names() {
        let mut spec = small_spec(Mode::Dp);
        spec.runs = 0;
        assert!(run_table(&spec).is_err());
        assert_eq!(ProblemKind::parse("phillips"), ProblemKind::Phillips);
        assert_eq!(
            ProblemKind::parse("smoothed_phillips"),
            ProblemKind::SmoothedPhillips
        );
        assert!(matches!(
            ProblemKind::parse("somewhere/file.mtx"),
            ProblemKind::File(_)
        ));
        let bad = ExperimentSpec {
            mode: Mode::Bounds,
            ..small_spec(Mode::Bounds)
        };
        assert!(run_table(&bad).is_err());
    }
}
