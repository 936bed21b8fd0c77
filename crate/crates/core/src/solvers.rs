//! Iterative solvers: row-action stochastic gradient descent with a
//! polynomially decaying stepsize, the classical Landweber iteration, and
//! the exact mean iteration of SGD.
//!
//! Iterates are indexed from 1; `x_1` is the initial guess and iterate
//! `x_{k+1}` is produced by the step taken with stepsize `eta_k`. A run over
//! a problem with `n` rows counts `n` iterations as one epoch.
//!
//! SGD runs maintain the full residual `A x_k - y` incrementally through the
//! cached row Gram matrix `A Aᵀ`: one step touches one row of `A` and one
//! row of the Gram, so a residual check costs `O(n)` instead of `O(n m)`.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::problems::{InverseProblem, NoisyObservation};
use crate::rng::Rng;
use crate::stopping::{dp_decide, dp_should_check, DiscrepancyRule, StopDecision};

/// Polynomially decaying stepsize `eta_j = c0 * j^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeSchedule {
    c0: f64,
    alpha: f64,
}

impl StepsizeSchedule {
    /// `alpha` is accepted in `[0, 2]`; the convergence theory covers
    /// `alpha < 1`, and larger values are allowed (with a warning) so that
    /// non-terminating schedules can be studied.
    pub fn new(c0: f64, alpha: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "stepsize scale must be positive and finite, got {c0}"
            )));
        }
        if !(0.0..=2.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "stepsize exponent must lie in [0, 2], got {alpha}"
            )));
        }
        if alpha >= 1.0 {
            log::warn!(
                "stepsize exponent alpha = {alpha} >= 1: the discrepancy principle may never \
                 trigger on such schedules"
            );
        }
        Ok(StepsizeSchedule { c0, alpha })
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `eta_j`.
    ///
    /// # Panics
    /// Panics if `j == 0`; steps are indexed from 1.
    #[inline]
    pub fn step_size(&self, j: usize) -> f64 {
        assert!(j >= 1, "stepsizes are indexed from 1");
        self.c0 * (j as f64).powf(-self.alpha)
    }
}

/// The standard stepsize scale `(max_i ||a_i||^2)^{-1}`, which keeps every
/// row update nonexpansive.
pub fn default_c0(a: &Matrix) -> Result<f64> {
    let max = a
        .row_norms_sq()
        .into_iter()
        .fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidArgument(
            "cannot derive a stepsize scale from an all-zero matrix".into(),
        ));
    }
    Ok(1.0 / max)
}

/// Configuration of a single SGD run.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub schedule: StepsizeSchedule,
    /// Initial guess; `None` means the zero vector.
    pub x1: Option<Vec<f64>>,
    /// Seed of the row sampling stream.
    pub seed: u64,
    /// Hard iteration budget.
    pub max_iterations: usize,
}

impl SgdConfig {
    pub fn new(schedule: StepsizeSchedule, seed: u64, max_iterations: usize) -> Self {
        SgdConfig {
            schedule,
            x1: None,
            seed,
            max_iterations,
        }
    }
}

/// What a run records along the way.
#[derive(Debug, Clone, Default)]
pub struct RecorderSpec {
    /// Record residual (and optionally error) every `cadence` iterates in
    /// addition to the rule-checked ones.
    pub cadence: Option<usize>,
    /// Also record `||x_k - x_true||` at recorded iterates.
    pub record_error: bool,
    /// Retain the sampled row index sequence.
    pub keep_index_trace: bool,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The discrepancy principle fired.
    Discrepancy,
    /// The iteration budget ran out before any rule fired.
    BudgetExhausted,
    /// A predetermined index was reached.
    APriori,
}

/// Stopping rule driving a run.
#[derive(Debug, Clone)]
pub enum StoppingRule {
    Discrepancy(DiscrepancyRule),
    /// Stop exactly at the given iterate (a priori rules, independent
    /// re-runs evaluated at an externally determined index).
    FixedIndex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSample {
    pub iteration: usize,
    pub residual_norm: f64,
    pub error_norm: Option<f64>,
}

/// Outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// The iterate at which the rule fired; `None` when the budget ran out.
    pub stop_iteration: Option<usize>,
    pub stop_reason: StopReason,
    /// Index of `x_final` (equals `stop_iteration` when a rule fired).
    pub final_iteration: usize,
    pub x_final: Vec<f64>,
    pub recorded: Vec<RecordedSample>,
    pub index_trace: Option<Vec<u32>>,
}

impl RunOutcome {
    /// Stopping index in epochs (iterations divided by the number of rows).
    pub fn epochs(&self, n: usize) -> f64 {
        self.final_iteration as f64 / n as f64
    }
}

/// One row-action step `x - eta ((a_i, x) - y_i) a_i`.
///
/// # Panics
/// Panics on inconsistent dimensions or a row index out of `0..n`.
pub fn sgd_step(x: &[f64], a: &Matrix, y_delta: &[f64], eta_k: f64, i_k: usize) -> Vec<f64> {
    assert_eq!(x.len(), a.ncols(), "iterate length");
    assert_eq!(y_delta.len(), a.nrows(), "data length");
    assert!(i_k < a.nrows(), "row index {i_k} out of 0..{}", a.nrows());
    let row = a.row(i_k);
    let coeff = eta_k * (linalg::dot(row, x) - y_delta[i_k]);
    let mut out = x.to_vec();
    linalg::axpy(-coeff, row, &mut out);
    out
}

struct DriveResult {
    x: Vec<f64>,
    iterations: usize,
    stopped_by_rule: bool,
    trace: Option<Vec<u32>>,
}

/// Core SGD loop. `visit` sees every iterate (`k`, `x_k`, `A x_k`) before a
/// step is taken and returns `true` to stop the run at that iterate.
#[allow(clippy::too_many_arguments)]
fn drive_sgd<F>(
    problem: &InverseProblem,
    y_delta: &[f64],
    schedule: &StepsizeSchedule,
    seed: u64,
    x1: Option<&[f64]>,
    budget: usize,
    keep_trace: bool,
    mut visit: F,
) -> Result<DriveResult>
where
    F: FnMut(usize, &[f64], &[f64]) -> bool,
{
    let n = problem.n();
    let m = problem.m();
    if y_delta.len() != n {
        return Err(Error::Dimension {
            context: "drive_sgd data",
            expected: n,
            found: y_delta.len(),
        });
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("iteration budget must be >= 1".into()));
    }
    let mut x = match x1 {
        Some(v) => {
            if v.len() != m {
                return Err(Error::Dimension {
                    context: "drive_sgd initial guess",
                    expected: m,
                    found: v.len(),
                });
            }
            v.to_vec()
        }
        None => vec![0.0; m],
    };
    let mut z = problem.matrix.matvec(&x)?;
    let gram = problem.row_gram();
    let mut rng = Rng::new(seed);
    let mut trace = keep_trace.then(Vec::new);
    let mut k = 1usize;
    loop {
        if visit(k, &x, &z) {
            return Ok(DriveResult {
                x,
                iterations: k,
                stopped_by_rule: true,
                trace,
            });
        }
        if k >= budget {
            return Ok(DriveResult {
                x,
                iterations: k,
                stopped_by_rule: false,
                trace,
            });
        }
        let i = rng.next_index(n);
        if let Some(t) = trace.as_mut() {
            t.push(i as u32);
        }
        let coeff = schedule.step_size(k) * (z[i] - y_delta[i]);
        linalg::axpy(-coeff, problem.matrix.row(i), &mut x);
        linalg::axpy(-coeff, gram.row(i), &mut z);
        k += 1;
    }
}

/// Fixed-horizon SGD loop exposing every iterate to an observer; used by
/// the ensemble estimators.
pub(crate) fn drive_sgd_observed<F>(
    problem: &InverseProblem,
    y_delta: &[f64],
    schedule: &StepsizeSchedule,
    seed: u64,
    k_max: usize,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64], &[f64]),
{
    drive_sgd(
        problem,
        y_delta,
        schedule,
        seed,
        None,
        k_max,
        false,
        |k, x, z| {
            visit(k, x, z);
            false
        },
    )
    .map(|_| ())
}

/// Runs SGD on a noisy observation under a stopping rule.
///
/// With a discrepancy rule the residual is evaluated at iterate 1 and every
/// `check_frequency`-th iterate; each evaluated residual is recorded. The
/// effective budget is the smaller of the config's and the rule's.
pub fn run_sgd(
    config: &SgdConfig,
    problem: &InverseProblem,
    observation: &NoisyObservation,
    rule: &StoppingRule,
    recorder: &RecorderSpec,
) -> Result<RunOutcome> {
    let mut recorded: Vec<RecordedSample> = Vec::new();
    let mut stop_reason = StopReason::BudgetExhausted;
    let x_true = &problem.x_true;
    let record_error = recorder.record_error;
    let cadence = recorder.cadence;
    let record = |k: usize,
                      x: &[f64],
                      residual: f64,
                      recorded: &mut Vec<RecordedSample>| {
        if recorded.last().is_some_and(|s| s.iteration == k) {
            return;
        }
        recorded.push(RecordedSample {
            iteration: k,
            residual_norm: residual,
            error_norm: record_error.then(|| linalg::dist(x, x_true)),
        });
    };

    let budget = match rule {
        StoppingRule::Discrepancy(dp) => config.max_iterations.min(dp.max_iterations),
        StoppingRule::FixedIndex(_) => config.max_iterations,
    };

    let result = drive_sgd(
        problem,
        &observation.y_delta,
        &config.schedule,
        config.seed,
        config.x1.as_deref(),
        budget,
        recorder.keep_index_trace,
        |k, x, z| {
            let mut stop = false;
            match rule {
                StoppingRule::Discrepancy(dp) => {
                    if dp_should_check(dp, k) {
                        let residual = linalg::dist(z, &observation.y_delta);
                        record(k, x, residual, &mut recorded);
                        if dp_decide(dp, k, residual) == StopDecision::Discrepancy {
                            stop_reason = StopReason::Discrepancy;
                            stop = true;
                        }
                    }
                }
                StoppingRule::FixedIndex(index) => {
                    if k >= *index {
                        stop_reason = StopReason::APriori;
                        stop = true;
                    }
                }
            }
            if !stop {
                if let Some(c) = cadence {
                    if k == 1 || k.is_multiple_of(c) {
                        let residual = linalg::dist(z, &observation.y_delta);
                        record(k, x, residual, &mut recorded);
                    }
                }
            } else if matches!(rule, StoppingRule::FixedIndex(_)) {
                let residual = linalg::dist(z, &observation.y_delta);
                record(k, x, residual, &mut recorded);
            }
            stop
        },
    )?;

    Ok(RunOutcome {
        stop_iteration: result.stopped_by_rule.then_some(result.iterations),
        stop_reason: if result.stopped_by_rule {
            stop_reason
        } else {
            StopReason::BudgetExhausted
        },
        final_iteration: result.iterations,
        x_final: result.x,
        recorded,
        index_trace: result.trace,
    })
}

/// Classical Landweber iteration `x_{k+1} = x_k - step * Aᵀ(A x_k - y)`,
/// started at zero, with the residual checked at every iterate against the
/// rule's threshold. The caller is responsible for `step * ||A||^2 <= 1`.
pub fn run_landweber(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    step: f64,
    rule: &DiscrepancyRule,
) -> Result<RunOutcome> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Landweber stepsize must be positive and finite, got {step}"
        )));
    }
    if observation.y_delta.len() != problem.n() {
        return Err(Error::Dimension {
            context: "run_landweber data",
            expected: problem.n(),
            found: observation.y_delta.len(),
        });
    }
    let mut x = vec![0.0; problem.m()];
    let mut recorded = Vec::new();
    let mut k = 1usize;
    loop {
        let mut residual_vec = problem.matrix.matvec(&x)?;
        for (r, y) in residual_vec.iter_mut().zip(&observation.y_delta) {
            *r -= y;
        }
        let residual = linalg::norm(&residual_vec);
        recorded.push(RecordedSample {
            iteration: k,
            residual_norm: residual,
            error_norm: None,
        });
        match dp_decide(rule, k, residual) {
            StopDecision::Discrepancy => {
                return Ok(RunOutcome {
                    stop_iteration: Some(k),
                    stop_reason: StopReason::Discrepancy,
                    final_iteration: k,
                    x_final: x,
                    recorded,
                    index_trace: None,
                });
            }
            StopDecision::BudgetExhausted => {
                return Ok(RunOutcome {
                    stop_iteration: None,
                    stop_reason: StopReason::BudgetExhausted,
                    final_iteration: k,
                    x_final: x,
                    recorded,
                    index_trace: None,
                });
            }
            StopDecision::Continue => {}
        }
        let gradient = problem.matrix.tr_matvec(&residual_vec)?;
        linalg::axpy(-step, &gradient, &mut x);
        k += 1;
    }
}

/// The exact mean iteration of SGD: a Landweber recursion with diminishing
/// steps, `x_{k+1} = x_k - (eta_k / n) (AᵀA x_k - Aᵀ y)`, started at zero.
/// Returns `x_1, ..., x_{k_max}`. Memory is `k_max * m` values; use
/// [`ExpectedIterates`] to stream long horizons.
pub fn expected_sgd_trajectory(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    k_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let n_inv = 1.0 / problem.n() as f64;
    let normal = problem.matrix.gram();
    let mut g = problem.matrix.tr_matvec(&observation.y_delta)?;
    for v in &mut g {
        *v *= n_inv;
    }
    let mut x = vec![0.0; problem.m()];
    let mut out = Vec::with_capacity(k_max);
    out.push(x.clone());
    for k in 1..k_max {
        let eta = schedule.step_size(k);
        let mut bx = normal.matvec(&x)?;
        for v in &mut bx {
            *v *= n_inv;
        }
        linalg::axpy(-eta, &bx, &mut x);
        linalg::axpy(eta, &g, &mut x);
        out.push(x.clone());
    }
    Ok(out)
}

/// Streaming form of the mean iteration, propagated in the eigenbasis of
/// `B = AᵀA / n` so one step costs `O(m)`. Reconstructing the current
/// iterate costs one `m x m` product.
pub struct ExpectedIterates {
    decomposition: crate::linalg::SpectralDecomposition,
    coords: Vec<f64>,
    g_coords: Vec<f64>,
    schedule: StepsizeSchedule,
    k: usize,
}

impl ExpectedIterates {
    pub fn new(
        problem: &InverseProblem,
        observation: &NoisyObservation,
        schedule: &StepsizeSchedule,
    ) -> Result<Self> {
        let dec = crate::linalg::sym_eigen(&problem.normal_matrix())?;
        Self::with_decomposition(dec, problem, &observation.y_delta, schedule)
    }

    /// Builds the stream on a precomputed decomposition of `AᵀA / n`.
    pub fn with_decomposition(
        decomposition: crate::linalg::SpectralDecomposition,
        problem: &InverseProblem,
        y_delta: &[f64],
        schedule: &StepsizeSchedule,
    ) -> Result<Self> {
        let n_inv = 1.0 / problem.n() as f64;
        let mut g = problem.matrix.tr_matvec(y_delta)?;
        for v in &mut g {
            *v *= n_inv;
        }
        let g_coords = decomposition.coords(&g)?;
        let coords = vec![0.0; problem.m()];
        Ok(ExpectedIterates {
            decomposition,
            coords,
            g_coords,
            schedule: *schedule,
            k: 1,
        })
    }

    /// Index of the current iterate (starts at 1).
    pub fn current_k(&self) -> usize {
        self.k
    }

    /// Advances to the next iterate.
    pub fn step(&mut self) {
        let eta = self.schedule.step_size(self.k);
        for ((c, &mu), &g) in self
            .coords
            .iter_mut()
            .zip(self.decomposition.eigenvalues())
            .zip(&self.g_coords)
        {
            *c = *c * (1.0 - eta * mu) + eta * g;
        }
        self.k += 1;
    }

    /// The current mean iterate `E[x_k]`.
    pub fn current(&self) -> Vec<f64> {
        self.decomposition
            .from_coords(&self.coords)
            .expect("coordinate length fixed at construction")
    }

    pub fn decomposition(&self) -> &crate::linalg::SpectralDecomposition {
        &self.decomposition
    }
}
