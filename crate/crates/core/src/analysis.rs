//! Numerical verification of the estimates behind discrepancy-principle
//! stopping, and Monte-Carlo bias–variance decomposition of SGD runs.
//!
//! The checks come in two flavours. Closed-form inequalities (the spectral
//! filter product bound, the stepsize sum bounds, the mean-iteration decay
//! bound) are evaluated exactly through eigendecompositions or direct
//! summation and reported through [`BoundReport`]. Stochastic quantities
//! (variances of the iterates) are estimated from ensembles and compared
//! against one-sided envelopes within a multiple of the standard error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, sym_eigen, sym_eigenvalues, Matrix, SpectralDecomposition};
use crate::problems::{InverseProblem, NoisyObservation};
use crate::rng::{derive_seed, tags, Rng};
use crate::solvers::{ExpectedIterates, StepsizeSchedule};
use crate::stopping::decay_constant;

/// Multiplicative slack applied to every bound comparison: `lhs` counts as a
/// violation only when `lhs > rhs * (1 + BOUND_SLACK)`.
pub const BOUND_SLACK: f64 = 1e-12;

/// One evaluated inequality.
#[derive(Debug, Clone)]
pub struct BoundCase {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCase {
    pub fn ratio(&self) -> f64 {
        ratio(self.lhs, self.rhs)
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        // Covers rhs == 0 as well: a zero left side never violates.
        0.0
    } else {
        lhs / rhs
    }
}

/// A violated inequality with its parameters.
#[derive(Debug, Clone)]
pub struct BoundViolation {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Aggregate of many bound evaluations.
#[derive(Debug, Clone, Default)]
pub struct BoundReport {
    pub checked_cases: usize,
    pub violations: Vec<BoundViolation>,
    pub max_ratio: f64,
}

impl BoundReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one case; the label is only materialized for violations.
    pub fn record(&mut self, lhs: f64, rhs: f64, label: impl FnOnce() -> String) {
        self.checked_cases += 1;
        let r = ratio(lhs, rhs);
        if r > self.max_ratio {
            self.max_ratio = r;
        }
        if lhs > rhs * (1.0 + BOUND_SLACK) {
            self.violations.push(BoundViolation {
                label: label(),
                lhs,
                rhs,
                gap: lhs - rhs,
            });
        }
    }

    pub fn record_case(&mut self, case: &BoundCase) {
        let label = case.label.clone();
        self.record(case.lhs, case.rhs, move || label);
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: BoundReport) {
        self.checked_cases += other.checked_cases;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
        self.violations.extend(other.violations);
    }
}

/// Log-log least-squares fit of a decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub window: (usize, usize),
    pub slope: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `log(value)` against `log(iteration)` over a
/// window. Refuses windows with fewer than five samples or nonpositive
/// values.
pub fn fit_rate(iterations: &[usize], values: &[f64], window: (usize, usize)) -> Result<RateFit> {
    if iterations.len() != values.len() {
        return Err(Error::Dimension {
            context: "fit_rate",
            expected: iterations.len(),
            found: values.len(),
        });
    }
    let (lo, hi) = window;
    let pairs: Vec<(f64, f64)> = iterations
        .iter()
        .zip(values)
        .filter(|(&k, _)| k >= lo && k <= hi)
        .map(|(&k, &v)| (k as f64, v))
        .collect();
    if pairs.len() < 5 {
        return Err(Error::Refused(format!(
            "rate fit needs at least 5 samples in [{lo}, {hi}], found {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(_, v)| v <= 0.0) {
        return Err(Error::Refused(
            "rate fit requires strictly positive values".into(),
        ));
    }
    let n = pairs.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(k, v) in &pairs {
        sx += k.ln();
        sy += v.ln();
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(k, v) in &pairs {
        let dx = k.ln() - mx;
        let dy = v.ln() - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Refused(
            "rate fit window collapses to a single abscissa".into(),
        ));
    }
    let slope = sxy / sxx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        window,
        slope,
        r_squared,
    })
}

/// Exact mean iterate by exhaustive enumeration of all row index sequences
/// `(i_1, ..., i_{k-1})`, each of probability `n^{-(k-1)}`. Refuses
/// instances with more than `10^6` sequences.
pub fn enumerate_expected_iterate(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    k: usize,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("iterates are indexed from 1".into()));
    }
    let n = problem.n();
    let m = problem.m();
    let steps = k - 1;
    let path_count = (n as f64).powi(steps as i32);
    if path_count > 1e6 {
        return Err(Error::Refused(format!(
            "enumeration over {n}^{steps} = {path_count:.3e} index sequences exceeds 1e6"
        )));
    }
    if steps == 0 {
        return Ok(vec![0.0; m]);
    }
    let paths = path_count as u64;
    let y = &observation.y_delta;
    let etas: Vec<f64> = (1..=steps).map(|j| schedule.step_size(j)).collect();
    // Kahan accumulation keeps the mean accurate over up to 1e6 terms.
    let mut sum = vec![0.0f64; m];
    let mut comp = vec![0.0f64; m];
    let mut digits = vec![0usize; steps];
    let mut x = vec![0.0f64; m];
    for _ in 0..paths {
        x.iter_mut().for_each(|v| *v = 0.0);
        for (step, &i) in digits.iter().enumerate() {
            let row = problem.matrix.row(i);
            let coeff = etas[step] * (linalg::dot(row, &x) - y[i]);
            linalg::axpy(-coeff, row, &mut x);
        }
        for ((s, c), &v) in sum.iter_mut().zip(comp.iter_mut()).zip(&x) {
            let t = v - *c;
            let new = *s + t;
            *c = (new - *s) - t;
            *s = new;
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < n {
                break;
            }
            *d = 0;
        }
    }
    let inv = 1.0 / paths as f64;
    Ok(sum.into_iter().map(|v| v * inv).collect())
}

/// Checks the spectral filter bound
/// `|| prod_{i=j}^{k} (I - eta_i S) S^p || <= p^p / (e^p (sum_{i=j}^k eta_i)^p)`
/// for a symmetric positive semidefinite `S`, exactly through the spectrum.
pub fn check_product_bound(
    s: &Matrix,
    schedule: &StepsizeSchedule,
    j: usize,
    k: usize,
    p: f64,
) -> Result<BoundCase> {
    let eigs = sym_eigenvalues(s)?;
    product_bound_from_spectrum(&eigs, schedule, j, k, p)
}

/// Same check on a precomputed spectrum (largest eigenvalue first).
pub fn product_bound_from_spectrum(
    eigenvalues: &[f64],
    schedule: &StepsizeSchedule,
    j: usize,
    k: usize,
    p: f64,
) -> Result<BoundCase> {
    if j < 1 || j > k {
        return Err(Error::InvalidArgument(format!(
            "product bound requires 1 <= j <= k, got j={j}, k={k}"
        )));
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "product bound requires p >= 0, got {p}"
        )));
    }
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    if schedule.step_size(j) * lmax > 1.0 + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "stepsize violates eta_j <= 1/||S|| (eta_j lambda_max = {})",
            schedule.step_size(j) * lmax
        )));
    }
    let eta_sum: f64 = (j..=k).map(|i| schedule.step_size(i)).sum();
    let mut lhs: f64 = 0.0;
    for &lambda in eigenvalues {
        let lambda = lambda.max(0.0);
        let mut prod = 1.0f64;
        for i in j..=k {
            prod *= 1.0 - schedule.step_size(i) * lambda;
        }
        let weight = if p == 0.0 { 1.0 } else { lambda.powf(p) };
        lhs = lhs.max(prod.abs() * weight);
    }
    let rhs = if p == 0.0 {
        1.0
    } else {
        p.powf(p) / (std::f64::consts::E.powf(p) * eta_sum.powf(p))
    };
    Ok(BoundCase {
        label: format!(
            "filter-product j={j} k={k} p={p} alpha={}",
            schedule.alpha()
        ),
        lhs,
        rhs,
    })
}

/// Stepsize sum bounds for `eta_j = eta0 j^{-alpha}`: the head sum over
/// `j <= k/2` and the tail sum over `k/2 < j < k` of
/// `eta_j^2 (sum_{l=j+1}^{k} eta_l)^{-r} j^{-beta}`, each against its
/// closed-form envelope. When the decisive exponent is exactly zero the
/// power factor is replaced by `ln k`.
pub fn check_sum_bounds(
    alpha: f64,
    beta: f64,
    r: f64,
    k: usize,
    eta0: f64,
) -> Result<[BoundCase; 2]> {
    sum_bound_cases(alpha, beta, r, k, eta0, 1.0)
}

#[allow(clippy::needless_range_loop)]
fn sum_bound_cases(
    alpha: f64,
    beta: f64,
    r: f64,
    k: usize,
    eta0: f64,
    rhs_scale: f64,
) -> Result<[BoundCase; 2]> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sum bounds require alpha in (0,1), got {alpha}"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "sum bounds require beta in [0,1], got {beta}"
        )));
    }
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sum bounds require r >= 0, got {r}"
        )));
    }
    if k < 4 {
        return Err(Error::InvalidArgument(format!(
            "sum bounds require k >= 4, got {k}"
        )));
    }
    if !(eta0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sum bounds require eta0 > 0, got {eta0}"
        )));
    }
    let eta = |j: usize| eta0 * (j as f64).powf(-alpha);
    // Suffix sums: tail[j] = sum_{l=j+1}^{k} eta_l for j = 1..k-1.
    let mut tail = vec![0.0f64; k + 1];
    for j in (1..k).rev() {
        tail[j] = tail[j + 1] + eta(j + 1);
    }
    let half = k / 2;
    let kf = k as f64;
    let mut head_sum = 0.0;
    for j in 1..=half {
        head_sum += eta(j).powi(2) * tail[j].powf(-r) * (j as f64).powf(-beta);
    }
    let mut tail_sum = 0.0;
    for j in (half + 1)..k {
        tail_sum += eta(j).powi(2) * tail[j].powf(-r) * (j as f64).powf(-beta);
    }

    let tb = 2.0 * alpha + beta;
    let (c_head, f_head) = if tb > 1.0 {
        (
            2f64.powf(r) * eta0.powf(2.0 - r) * tb / (tb - 1.0),
            kf.powf(-r * (1.0 - alpha)),
        )
    } else if tb == 1.0 {
        // Exponent max(0, 1 - 2 alpha - beta) evaluates max(0, 0): ln k.
        (
            2f64.powf(r) * eta0.powf(2.0 - r) * 2.0,
            kf.powf(-r * (1.0 - alpha)) * kf.ln(),
        )
    } else {
        (
            2f64.powf(r) * eta0.powf(2.0 - r) * 2f64.powf(tb - 1.0) / (1.0 - tb),
            kf.powf(-r * (1.0 - alpha) + 1.0 - tb),
        )
    };
    let (c_tail, f_tail) = if r > 1.0 {
        (
            2f64.powf(tb) * eta0.powf(2.0 - r) * r / (r - 1.0),
            kf.powf(-((2.0 - r) * alpha + beta)),
        )
    } else if r == 1.0 {
        (
            2f64.powf(tb) * eta0.powf(2.0 - r) * 2.0,
            kf.powf(-((2.0 - r) * alpha + beta)) * kf.ln(),
        )
    } else {
        (
            2f64.powf(tb) * eta0.powf(2.0 - r) * 2f64.powf(r - 1.0) / (1.0 - r),
            kf.powf(-((2.0 - r) * alpha + beta) + 1.0 - r),
        )
    };
    let base = format!("alpha={alpha} beta={beta} r={r} k={k}");
    Ok([
        BoundCase {
            label: format!("sum-head {base}"),
            lhs: head_sum,
            rhs: c_head * f_head * rhs_scale,
        },
        BoundCase {
            label: format!("sum-tail {base}"),
            lhs: tail_sum,
            rhs: c_tail * f_tail * rhs_scale,
        },
    ])
}

/// Mean-iteration error decay on a problem with known source representation
/// `(p, w)`: checks `||B^s (x_{k+1} - x)|| <= c_{p,s} k^{-(p+s)(1-alpha)}`
/// on exact data for every `k <= k_max` and fits the empirical decay slope
/// on the trailing decade of positive values.
pub fn check_decay_rate(
    problem: &InverseProblem,
    schedule: &StepsizeSchedule,
    k_max: usize,
    s: f64,
) -> Result<(RateFit, BoundReport)> {
    if s != 0.0 && s != 0.5 {
        return Err(Error::InvalidArgument(format!(
            "decay check is defined for s in {{0, 1/2}}, got {s}"
        )));
    }
    if k_max < 10 {
        return Err(Error::InvalidArgument("k_max must be >= 10".into()));
    }
    let (p, w_norm) = source_metadata(problem)?;
    let dec = sym_eigen(&problem.normal_matrix())?;
    let floor = dec.eigenvalue_floor();
    let xc = dec.coords(&problem.x_true)?;
    let x_scale = linalg::norm(&problem.x_true);
    for (c, &mu) in xc.iter().zip(dec.eigenvalues()) {
        if mu <= floor && c.abs() > 1e-8 * x_scale {
            return Err(Error::Refused(
                "solution has mass outside the numerical range of B; no source representation"
                    .into(),
            ));
        }
    }
    let cps = decay_constant(p + s, schedule.alpha(), schedule.c0(), w_norm)?;
    // Component weights mu^{2s} (x-coordinate)^2; the filter product over
    // the steps is maintained incrementally per eigenvalue.
    let weights: Vec<f64> = xc
        .iter()
        .zip(dec.eigenvalues())
        .map(|(&c, &mu)| mu.max(0.0).powf(2.0 * s) * c * c)
        .collect();
    let mut prod: Vec<f64> = vec![1.0; dec.dim()];
    let mut report = BoundReport::new();
    let mut ks = Vec::with_capacity(k_max);
    let mut lhs_series = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let eta = schedule.step_size(k);
        for (pr, &mu) in prod.iter_mut().zip(dec.eigenvalues()) {
            *pr *= 1.0 - eta * mu.max(0.0);
        }
        let lhs_sq: f64 = weights.iter().zip(&prod).map(|(&w, &pr)| w * pr * pr).sum();
        let lhs = lhs_sq.sqrt();
        let rhs = cps * (k as f64).powf(-(p + s) * (1.0 - schedule.alpha()));
        report.record(lhs, rhs, || {
            format!("decay p={p} s={s} alpha={} k={k}", schedule.alpha())
        });
        ks.push(k);
        lhs_series.push(lhs);
    }
    // Fit on the last decade where the values are still meaningfully positive.
    let k_pos = ks
        .iter()
        .zip(&lhs_series)
        .rev()
        .find(|(_, &v)| v > 1e-280)
        .map(|(&k, _)| k)
        .unwrap_or(1);
    let window = ((k_pos / 10).max(1), k_pos);
    let fit = fit_rate(&ks, &lhs_series, window)?;
    Ok((fit, report))
}

fn source_metadata(problem: &InverseProblem) -> Result<(f64, f64)> {
    match (problem.param("p"), problem.param("w_norm")) {
        (Some(p), Some(w)) => Ok((p, w)),
        _ => Err(Error::Refused(format!(
            "problem '{}' carries no source representation metadata (p, w_norm)",
            problem.name
        ))),
    }
}

/// Monte-Carlo bias–variance series of an SGD ensemble on one observation.
#[derive(Debug, Clone)]
pub struct BiasVarianceSeries {
    /// Sampled iterates (multiples of the cadence).
    pub iterations: Vec<usize>,
    /// Mean squared error `E ||x_k - x||^2`.
    pub mse: Vec<f64>,
    /// Error variance `E ||x_k - E x_k||^2` (exact-mean centered, 1/N).
    pub err_variance: Vec<f64>,
    /// Mean squared residual `E ||A x_k - y||^2`.
    pub msr: Vec<f64>,
    /// Residual variance `E ||A (x_k - E x_k)||^2`.
    pub res_variance: Vec<f64>,
    /// Squared bias `||E x_k - x||^2`.
    pub bias_err: Vec<f64>,
    /// Squared residual of the mean iterate `||A E x_k - y||^2`.
    pub bias_res: Vec<f64>,
    /// Standard error of the error-side decomposition gap estimator.
    pub se_err: Vec<f64>,
    /// Standard error of the residual-side decomposition gap estimator.
    pub se_res: Vec<f64>,
    pub n_samples: usize,
    /// Squared noise norm of the observation, the reference level of the
    /// residual plots.
    pub delta_sq: f64,
}

/// Runs `n_runs` independent SGD paths on one observation and estimates the
/// bias–variance decomposition at every `cadence`-th iterate up to `k_max`.
///
/// The mean iterate `E[x_k]` comes from the exact recursion, not from the
/// sample mean; variances are centered on it and normalized by `1/n_runs`.
/// Run `r` samples rows with the seed `derive_seed(master_seed, [SGD, r])`;
/// aggregation is ordered by run index, so results do not depend on the
/// parallel schedule.
pub fn ensemble_bias_variance(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    n_runs: usize,
    k_max: usize,
    cadence: usize,
    master_seed: u64,
) -> Result<BiasVarianceSeries> {
    let dec = sym_eigen(&problem.normal_matrix())?;
    ensemble_bias_variance_with(
        &dec,
        problem,
        observation,
        schedule,
        n_runs,
        k_max,
        cadence,
        master_seed,
    )
}

/// Same as [`ensemble_bias_variance`] on a precomputed decomposition of
/// `AᵀA / n`, so callers running many cells pay for the eigensolve once.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_bias_variance_with(
    normal_matrix_dec: &SpectralDecomposition,
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    n_runs: usize,
    k_max: usize,
    cadence: usize,
    master_seed: u64,
) -> Result<BiasVarianceSeries> {
    if n_runs < 2 {
        return Err(Error::InvalidArgument(
            "bias-variance estimation needs at least 2 runs".into(),
        ));
    }
    if cadence == 0 || k_max < cadence {
        return Err(Error::InvalidArgument(
            "cadence must be >= 1 and k_max >= cadence".into(),
        ));
    }
    let samples: Vec<usize> = (1..=k_max / cadence).map(|i| i * cadence).collect();
    // Exact mean trajectory and its image at the sampled iterates.
    let mut stream = ExpectedIterates::with_decomposition(
        normal_matrix_dec.clone(),
        problem,
        &observation.y_delta,
        schedule,
    )?;
    let mut mean_x = Vec::with_capacity(samples.len());
    let mut mean_ax = Vec::with_capacity(samples.len());
    for &target in &samples {
        while stream.current_k() < target {
            stream.step();
        }
        let ex = stream.current();
        let aex = problem.matrix.matvec(&ex)?;
        mean_x.push(ex);
        mean_ax.push(aex);
    }
    let bias_err: Vec<f64> = mean_x
        .iter()
        .map(|ex| linalg::dist_sq(ex, &problem.x_true))
        .collect();
    let bias_res: Vec<f64> = mean_ax
        .iter()
        .map(|aex| linalg::dist_sq(aex, &observation.y_delta))
        .collect();

    struct RunStats {
        err_sq: Vec<f64>,
        dist_sq: Vec<f64>,
        res_sq: Vec<f64>,
        rvar_sq: Vec<f64>,
    }

    let per_run: Vec<Result<RunStats>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let seed = derive_seed(master_seed, &[tags::SGD, run as u64]);
            let mut stats = RunStats {
                err_sq: Vec::with_capacity(samples.len()),
                dist_sq: Vec::with_capacity(samples.len()),
                res_sq: Vec::with_capacity(samples.len()),
                rvar_sq: Vec::with_capacity(samples.len()),
            };
            let mut next = 0usize;
            crate::solvers::drive_sgd_observed(
                problem,
                &observation.y_delta,
                schedule,
                seed,
                k_max,
                |k, x, z| {
                    if next < samples.len() && k == samples[next] {
                        stats.err_sq.push(linalg::dist_sq(x, &problem.x_true));
                        stats.dist_sq.push(linalg::dist_sq(x, &mean_x[next]));
                        stats
                            .res_sq
                            .push(linalg::dist_sq(z, &observation.y_delta));
                        stats.rvar_sq.push(linalg::dist_sq(z, &mean_ax[next]));
                        next += 1;
                    }
                },
            )?;
            Ok(stats)
        })
        .collect();

    let mut runs = Vec::with_capacity(n_runs);
    for r in per_run {
        runs.push(r?);
    }

    let s_len = samples.len();
    let nf = n_runs as f64;
    let mut mse = vec![0.0; s_len];
    let mut err_variance = vec![0.0; s_len];
    let mut msr = vec![0.0; s_len];
    let mut res_variance = vec![0.0; s_len];
    for run in &runs {
        for i in 0..s_len {
            mse[i] += run.err_sq[i];
            err_variance[i] += run.dist_sq[i];
            msr[i] += run.res_sq[i];
            res_variance[i] += run.rvar_sq[i];
        }
    }
    for i in 0..s_len {
        mse[i] /= nf;
        err_variance[i] /= nf;
        msr[i] /= nf;
        res_variance[i] /= nf;
    }
    // Standard errors of the per-run decomposition gaps
    // D_err = ||x - x_true||^2 - ||x - E x||^2 (estimates bias_err), and the
    // analogous residual-side quantity.
    let mut se_err = vec![0.0; s_len];
    let mut se_res = vec![0.0; s_len];
    for i in 0..s_len {
        let mean_de = mse[i] - err_variance[i];
        let mean_dr = msr[i] - res_variance[i];
        let mut var_de = 0.0;
        let mut var_dr = 0.0;
        for run in &runs {
            let de = run.err_sq[i] - run.dist_sq[i] - mean_de;
            let dr = run.res_sq[i] - run.rvar_sq[i] - mean_dr;
            var_de += de * de;
            var_dr += dr * dr;
        }
        se_err[i] = (var_de / (nf - 1.0)).sqrt() / nf.sqrt();
        se_res[i] = (var_dr / (nf - 1.0)).sqrt() / nf.sqrt();
    }
    Ok(BiasVarianceSeries {
        iterations: samples,
        mse,
        err_variance,
        msr,
        res_variance,
        bias_err,
        bias_res,
        se_err,
        se_res,
        n_samples: n_runs,
        delta_sq: observation.delta_abs * observation.delta_abs,
    })
}

/// One-sided envelope for the variance `E ||B^s (x_k - E x_k)||^2`,
/// obtained by iterating the variance recursion as an equality from zero:
/// `d_{k+1} = sum_{j<=k} eta_j^2 phi_j^2 (c_s d_j + 2 c_p j^{-2(1-alpha)(p+1/2)} + 2 delta^2)`
/// with `phi_j = ||B^{1/2+s} prod_{i=j+1}^{k} (I - eta_i B)||` evaluated
/// spectrally. Returns `d_1, ..., d_{k_max}`. Cost is `O(k_max^2 m)`.
pub fn variance_recursion_envelope(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    k_max: usize,
    s: f64,
) -> Result<Vec<f64>> {
    if s != 0.0 && s != 0.5 {
        return Err(Error::InvalidArgument(format!(
            "variance envelope is defined for s in {{0, 1/2}}, got {s}"
        )));
    }
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let (p, w_norm) = source_metadata(problem)?;
    let alpha = schedule.alpha();
    let n = problem.n() as f64;
    let mu: Vec<f64> = sym_eigenvalues(&problem.normal_matrix())?
        .into_iter()
        .map(|v| v.max(0.0))
        .collect();
    let a_norm_sq = n * mu.first().copied().unwrap_or(0.0);
    let c_s = n.powf(2.0 * s) * a_norm_sq.powf(2.0 * (0.5 - s));
    let cph = decay_constant(p + 0.5, alpha, schedule.c0(), w_norm)?;
    let c_p = linalg::norm(&problem.y_true)
        .max(n.sqrt() * cph * 2f64.powf((p + 0.5) * (1.0 - alpha)))
        .powi(2);
    let delta_sq = observation.delta_abs * observation.delta_abs;
    let exponent = -2.0 * (1.0 - alpha) * (p + 0.5);

    let mut envelope = vec![0.0f64; k_max];
    // prods[j-1][l] = prod_{i=j+1}^{k} (1 - eta_i mu_l), maintained over k.
    let mut prods: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    for k in 1..k_max {
        let eta_k = schedule.step_size(k);
        // New row j = k starts as the empty product; the factor (1 - eta_k mu)
        // folds into every row with j < k.
        for row in prods.iter_mut() {
            for (pr, &m) in row.iter_mut().zip(&mu) {
                *pr *= 1.0 - eta_k * m;
            }
        }
        prods.push(vec![1.0; mu.len()]);
        let mut total = 0.0;
        for j in 1..=k {
            let phi = prods[j - 1]
                .iter()
                .zip(&mu)
                .fold(0.0f64, |acc, (&pr, &m)| acc.max(m.powf(0.5 + s) * pr.abs()));
            let eta_j = schedule.step_size(j);
            total += eta_j
                * eta_j
                * phi
                * phi
                * (c_s * envelope[j - 1] + 2.0 * c_p * (j as f64).powf(exponent) + 2.0 * delta_sq);
        }
        envelope[k] = total;
    }
    Ok(envelope)
}

/// Pathwise noise-propagation check: runs SGD on exact and on noisy data
/// with a shared index sequence and verifies, at every iterate up to
/// `k_max`, the two estimates
/// `||A(x'_k - x_k) - (y' - y)|| <= delta prod_{j<k} (1 + eta_j ||A||^2)` and
/// `||x'_k - x_k|| <= delta ||A|| sum_{j<k} eta_j prod_{i<j} (1 + eta_i ||A||^2)`,
/// where the primes denote the noisy-data path.
pub fn check_pathwise_noise(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    schedule: &StepsizeSchedule,
    seed: u64,
    k_max: usize,
) -> Result<BoundReport> {
    let n = problem.n();
    let m = problem.m();
    if observation.y_delta.len() != n {
        return Err(Error::Dimension {
            context: "check_pathwise_noise",
            expected: n,
            found: observation.y_delta.len(),
        });
    }
    let a_norm = problem.operator_norm();
    let a_norm_sq = a_norm * a_norm;
    let delta = observation.delta_abs;
    let gram = problem.row_gram();
    let mut rng = Rng::new(seed);
    let mut x_noisy = vec![0.0; m];
    let mut x_exact = vec![0.0; m];
    let mut z_noisy = vec![0.0; n];
    let mut z_exact = vec![0.0; n];
    let mut prod = 1.0f64;
    let mut sum = 0.0f64;
    let mut report = BoundReport::new();
    let mut buffer = vec![0.0; n];
    for k in 1..=k_max {
        for i in 0..n {
            buffer[i] = z_noisy[i] - z_exact[i] - (observation.y_delta[i] - problem.y_true[i]);
        }
        report.record(linalg::norm(&buffer), delta * prod, || {
            format!("noise-image seed={seed} k={k}")
        });
        report.record(linalg::dist(&x_noisy, &x_exact), delta * a_norm * sum, || {
            format!("noise-iterate seed={seed} k={k}")
        });
        if k == k_max {
            break;
        }
        let i = rng.next_index(n);
        let eta = schedule.step_size(k);
        sum += eta * prod;
        prod *= 1.0 + eta * a_norm_sq;
        let c_noisy = eta * (z_noisy[i] - observation.y_delta[i]);
        linalg::axpy(-c_noisy, problem.matrix.row(i), &mut x_noisy);
        linalg::axpy(-c_noisy, gram.row(i), &mut z_noisy);
        let c_exact = eta * (z_exact[i] - problem.y_true[i]);
        linalg::axpy(-c_exact, problem.matrix.row(i), &mut x_exact);
        linalg::axpy(-c_exact, gram.row(i), &mut z_exact);
    }
    Ok(report)
}

/// Discrepancy-principle stopping index of the exact mean iteration, found
/// by propagating the residual in the eigenbasis of `A Aᵀ / n`. Returns
/// `None` when the threshold is not reached within `k_cap` iterates.
pub fn expected_stop_index(
    problem: &InverseProblem,
    observation: &NoisyObservation,
    tau_star: f64,
    schedule: &StepsizeSchedule,
    k_cap: usize,
) -> Result<Option<usize>> {
    let mut scaled = problem.row_gram().clone();
    scaled.scale(1.0 / problem.n() as f64);
    let dec = sym_eigen(&scaled)?;
    expected_stop_index_with(&dec, observation, tau_star, schedule, k_cap)
}

/// Same as [`expected_stop_index`] on a precomputed decomposition of
/// `A Aᵀ / n`.
pub fn expected_stop_index_with(
    row_gram_scaled: &SpectralDecomposition,
    observation: &NoisyObservation,
    tau_star: f64,
    schedule: &StepsizeSchedule,
    k_cap: usize,
) -> Result<Option<usize>> {
    if !(tau_star > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "expected stop index requires tau* > 1, got {tau_star}"
        )));
    }
    let threshold = tau_star * observation.delta_abs;
    // Residual coordinates of A x_1 - y with x_1 = 0.
    let mut rho: Vec<f64> = row_gram_scaled
        .coords(&observation.y_delta)?
        .into_iter()
        .map(|v| -v)
        .collect();
    for k in 1..=k_cap {
        if linalg::norm(&rho) <= threshold {
            return Ok(Some(k));
        }
        let eta = schedule.step_size(k);
        for (r, &mu) in rho.iter_mut().zip(row_gram_scaled.eigenvalues()) {
            *r *= 1.0 - eta * mu.max(0.0);
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{add_noise, gen_spectral};
    use crate::solvers::{default_c0, expected_sgd_trajectory};

    fn toy_problem(m: usize, p: f64, seed: u64) -> InverseProblem {
        gen_spectral(m, p, 0.7, 1.0, seed).unwrap()
    }

    #[test]
    fn enumeration_matches_recursion() {
        let mut rng = Rng::new(3);
        let a = Matrix::from_fn(3, 2, |_, _| rng.next_standard_normal());
        let x_true = vec![1.0, -0.5];
        let y_true = a.matvec(&x_true).unwrap();
        let p = InverseProblem::new("tiny", a, x_true, y_true, Default::default()).unwrap();
        let obs = add_noise(&p, 0.1, 5).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&p.matrix).unwrap(), 0.4).unwrap();
        let k = 4;
        let brute = enumerate_expected_iterate(&p, &obs, &schedule, k).unwrap();
        let traj = expected_sgd_trajectory(&p, &obs, &schedule, k).unwrap();
        let scale = linalg::norm(&brute).max(1.0);
        for (a, b) in brute.iter().zip(&traj[k - 1]) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
        // k = 1 is the initial guess; oversized instances are refused.
        assert_eq!(
            enumerate_expected_iterate(&p, &obs, &schedule, 1).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(
            enumerate_expected_iterate(&p, &obs, &schedule, 20),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn product_bound_p_zero_and_sweep() {
        let s = Matrix::diag(&[2.0, 1.0, 0.0]);
        let schedule = StepsizeSchedule::new(0.5, 0.3).unwrap();
        let case = check_product_bound(&s, &schedule, 1, 10, 0.0).unwrap();
        assert_eq!(case.rhs, 1.0);
        assert!(case.lhs <= 1.0 + 1e-15);
        let mut report = BoundReport::new();
        for p in [0.0, 0.5, 1.0, 2.0] {
            for k in [1usize, 3, 10, 50] {
                for j in [1usize, 2] {
                    if j > k {
                        continue;
                    }
                    report.record_case(&check_product_bound(&s, &schedule, j, k, p).unwrap());
                }
            }
        }
        assert!(report.is_clean(), "{:?}", report.violations);
        // Stepsize above 1/||S|| violates the precondition.
        let bad = StepsizeSchedule::new(1.0, 0.3).unwrap();
        assert!(check_product_bound(&s, &bad, 1, 5, 1.0).is_err());
    }

    #[test]
    fn scalar_filter_inequality_on_grid() {
        // max over lambda in [0, 1/eta] of (1 - eta lambda) lambda^p stays
        // below p^p / (e^p eta^p) (single factor, scalar operator).
        let eta = 0.37f64;
        for p in [0.25f64, 0.5, 1.0, 2.0] {
            let rhs = p.powf(p) / (std::f64::consts::E.powf(p) * eta.powf(p));
            let steps = 1_000_000;
            let mut worst = 0.0f64;
            for i in 0..=steps {
                let lambda = i as f64 / steps as f64 / eta;
                worst = worst.max((1.0 - eta * lambda) * lambda.powf(p));
            }
            assert!(worst <= rhs * (1.0 + 1e-9), "p={p}: {worst} vs {rhs}");
        }
    }

    #[test]
    fn sum_bounds_hold_and_log_branch_triggers() {
        let cases = check_sum_bounds(0.5, 0.0, 1.0, 16, 1.0).unwrap();
        for c in &cases {
            assert!(c.lhs <= c.rhs * (1.0 + BOUND_SLACK), "{}", c.label);
        }
        // 2 alpha + beta = 1 and r = 1 both take the ln k convention: the
        // head envelope must scale like k^e ln k between two k values.
        let k1 = check_sum_bounds(0.5, 0.0, 1.0, 100, 1.0).unwrap();
        let k2 = check_sum_bounds(0.5, 0.0, 1.0, 1000, 1.0).unwrap();
        let growth_head = k2[0].rhs / k1[0].rhs;
        let plain = (1000f64 / 100.0).powf(-0.5);
        let with_log = plain * (1000f64.ln() / 100f64.ln());
        assert!((growth_head - with_log).abs() < 1e-12 * with_log);
        assert!((growth_head - plain).abs() > 1e-3 * plain);
        // Domain validation.
        assert!(check_sum_bounds(1.2, 0.0, 1.0, 16, 1.0).is_err());
        assert!(check_sum_bounds(0.5, 0.0, 1.0, 3, 1.0).is_err());
    }

    #[test]
    fn corrupted_constant_is_reported() {
        let cases = sum_bound_cases(0.3, 0.5, 1.0, 256, 1.0, 1e-3).unwrap();
        let mut report = BoundReport::new();
        for c in &cases {
            report.record_case(c);
        }
        assert!(!report.is_clean());
        assert!(report.max_ratio > 1.0);
        let v = &report.violations[0];
        assert!(v.label.contains("alpha=0.3"));
        assert!(v.gap > 0.0);
    }

    #[test]
    fn decay_rate_bound_and_slope() {
        let p = toy_problem(8, 1.0, 11);
        let schedule = StepsizeSchedule::new(1.0, 0.3).unwrap();
        for s in [0.0, 0.5] {
            let (fit, report) = check_decay_rate(&p, &schedule, 2000, s).unwrap();
            assert!(report.is_clean(), "s={s}: {:?}", report.violations);
            assert_eq!(report.checked_cases, 2000);
            let target = -(1.0 + s) * 0.7;
            assert!(
                fit.slope <= target + 0.1,
                "slope {} target {}",
                fit.slope,
                target
            );
        }
        assert!(check_decay_rate(&p, &schedule, 2000, 0.3).is_err());
        // No metadata: refuse.
        let plain = crate::problems::gen_gravity(8, 0.25).unwrap();
        assert!(matches!(
            check_decay_rate(&plain, &schedule, 100, 0.0),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn half_power_norm_equals_scaled_residual() {
        // ||B^(1/2) (x_k - x_true)|| = ||A x_k - y_true|| / sqrt(n) on exact
        // data.
        let p = toy_problem(6, 0.5, 7);
        let obs = add_noise(&p, 0.0, 1).unwrap();
        let schedule = StepsizeSchedule::new(1.0, 0.5).unwrap();
        let traj = expected_sgd_trajectory(&p, &obs, &schedule, 30).unwrap();
        let b = p.normal_matrix();
        let dec = sym_eigen(&b).unwrap();
        for k in [1usize, 5, 29] {
            let diff = linalg::sub(&traj[k], &p.x_true);
            let via_b = linalg::norm(&dec.apply_power(0.5, &diff).unwrap());
            let ax = p.matrix.matvec(&traj[k]).unwrap();
            let via_res = linalg::dist(&ax, &p.y_true) / (p.n() as f64).sqrt();
            assert!((via_b - via_res).abs() <= 1e-10 * via_res.max(1e-12));
        }
    }

    #[test]
    fn fit_rate_cases() {
        let ks: Vec<usize> = (1..=100).collect();
        let pow: Vec<f64> = ks.iter().map(|&k| 3.0 * (k as f64).powf(-2.0)).collect();
        let fit = fit_rate(&ks, &pow, (1, 100)).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-6);
        assert!(fit.r_squared > 1.0 - 1e-12);
        let flat = vec![2.5; 100];
        let fit = fit_rate(&ks, &flat, (1, 100)).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(matches!(fit_rate(&ks, &pow, (1, 4)), Err(Error::Refused(_))));
        let with_zero: Vec<f64> = (0..100).map(|i| if i == 50 { 0.0 } else { 1.0 }).collect();
        assert!(matches!(
            fit_rate(&ks, &with_zero, (1, 100)),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn phi_factor_matches_explicit_operator_norm() {
        // The spectral evaluation of ||B^{1/2+s} prod (I - eta_i B)|| equals
        // the operator norm of the explicitly formed product.
        let p = toy_problem(5, 1.0, 3);
        let b = p.normal_matrix();
        let schedule = StepsizeSchedule::new(1.0, 0.3).unwrap();
        let dec = sym_eigen(&b).unwrap();
        let (j, k, s) = (2usize, 7usize, 0.5f64);
        let phi_spectral = dec.eigenvalues().iter().fold(0.0f64, |acc, &mu| {
            let mu = mu.max(0.0);
            let mut pr = 1.0;
            for i in (j + 1)..=k {
                pr *= 1.0 - schedule.step_size(i) * mu;
            }
            acc.max(mu.powf(0.5 + s) * pr.abs())
        });
        // Explicit product B^{1/2+s} * prod (I - eta_i B).
        let mut product = Matrix::identity(5);
        for i in (j + 1)..=k {
            let mut factor = Matrix::identity(5);
            let eta = schedule.step_size(i);
            for r in 0..5 {
                for c in 0..5 {
                    factor[(r, c)] -= eta * b[(r, c)];
                }
            }
            product = product.matmul(&factor).unwrap();
        }
        let mut full = Matrix::zeros(5, 5);
        for c in 0..5 {
            let col: Vec<f64> = (0..5).map(|r| product[(r, c)]).collect();
            let powered = dec.apply_power(0.5 + s, &col).unwrap();
            for r in 0..5 {
                full[(r, c)] = powered[r];
            }
        }
        let phi_direct = full.operator_norm();
        assert!(
            (phi_spectral - phi_direct).abs() <= 1e-12 * phi_direct.max(1e-12),
            "{phi_spectral} vs {phi_direct}"
        );
    }

    #[test]
    fn variance_envelope_dominates_monte_carlo() {
        let m = 20;
        let problem = gen_spectral(m, 1.0, 0.5, 1.0, 4).unwrap();
        let obs = add_noise(&problem, 1e-2, 9).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), 0.3).unwrap();
        let k_max = 150;
        let n_runs = 5000;
        let series =
            ensemble_bias_variance(&problem, &obs, &schedule, n_runs, k_max, 10, 77).unwrap();
        for s in [0.0, 0.5] {
            let envelope =
                variance_recursion_envelope(&problem, &obs, &schedule, k_max, s).unwrap();
            assert_eq!(envelope[0], 0.0);
            assert!(envelope.iter().all(|v| v.is_finite()));
            for (idx, &k) in series.iterations.iter().enumerate() {
                // E ||B^s (x_k - E x_k)||^2: for s = 1/2 this is the residual
                // variance divided by n.
                let mc = if s == 0.0 {
                    series.err_variance[idx]
                } else {
                    series.res_variance[idx] / m as f64
                };
                assert!(
                    mc <= envelope[k - 1] * (1.0 + 1e-9),
                    "s={s} k={k}: mc {mc} envelope {}",
                    envelope[k - 1]
                );
            }
        }
    }

    #[test]
    fn envelope_is_finite_on_exact_data() {
        // Without noise, only the decaying source term feeds the recursion;
        // the envelope stays finite and strictly positive past the start.
        let problem = gen_spectral(8, 2.0, 0.5, 1.0, 6).unwrap();
        let obs = add_noise(&problem, 0.0, 1).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), 0.3).unwrap();
        let envelope = variance_recursion_envelope(&problem, &obs, &schedule, 80, 0.0).unwrap();
        assert_eq!(envelope[0], 0.0);
        assert!(envelope[1..].iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn bias_variance_decomposition_identity() {
        let problem = toy_problem(10, 0.5, 21);
        let obs = add_noise(&problem, 5e-2, 13).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), 0.2).unwrap();
        let series = ensemble_bias_variance(&problem, &obs, &schedule, 400, 200, 20, 5150).unwrap();
        for i in 0..series.iterations.len() {
            let gap_err = (series.mse[i] - series.bias_err[i] - series.err_variance[i]).abs();
            let gap_res = (series.msr[i] - series.bias_res[i] - series.res_variance[i]).abs();
            let tol_err = 4.0 * series.se_err[i] + 1e-12;
            let tol_res = 4.0 * series.se_res[i] + 1e-12;
            assert!(gap_err <= tol_err, "err gap {gap_err} > {tol_err}");
            assert!(gap_res <= tol_res, "res gap {gap_res} > {tol_res}");
        }
        assert_eq!(series.n_samples, 400);
        assert!(series.delta_sq > 0.0);
    }

    #[test]
    fn deterministic_single_path_has_zero_variance() {
        // One-row system: SGD has a single possible path, so both variance
        // series vanish identically on exact data.
        let a = Matrix::from_row_major(1, 2, vec![1.0, 2.0]).unwrap();
        let problem =
            InverseProblem::new("row", a, vec![1.0, 1.0], vec![3.0], Default::default()).unwrap();
        let obs = add_noise(&problem, 0.0, 0).unwrap();
        let schedule = StepsizeSchedule::new(0.1, 0.4).unwrap();
        let series = ensemble_bias_variance(&problem, &obs, &schedule, 8, 40, 5, 3).unwrap();
        for i in 0..series.iterations.len() {
            assert!(series.err_variance[i] <= 1e-25);
            assert!(series.res_variance[i] <= 1e-25);
        }
    }

    #[test]
    fn monte_carlo_mean_approaches_exact_expectation() {
        // Sample mean over 10000 seeds converges to the exact mean iterate.
        let mut rng = Rng::new(8);
        let a = Matrix::from_fn(10, 4, |_, _| rng.next_standard_normal());
        let x_true = vec![0.5, -1.0, 0.25, 2.0];
        let y_true = a.matvec(&x_true).unwrap();
        let problem = InverseProblem::new("mc", a, x_true, y_true, Default::default()).unwrap();
        let obs = add_noise(&problem, 0.1, 3).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), 0.4).unwrap();
        let k = 10;
        let exact = &expected_sgd_trajectory(&problem, &obs, &schedule, k).unwrap()[k - 1];
        let n_runs = 10_000usize;
        let sums: Vec<f64> = (0..n_runs)
            .into_par_iter()
            .map(|run| {
                let seed = derive_seed(99, &[tags::SGD, run as u64]);
                let mut out = Vec::new();
                crate::solvers::drive_sgd_observed(
                    &problem,
                    &obs.y_delta,
                    &schedule,
                    seed,
                    k,
                    |kk, x, _| {
                        if kk == k {
                            out = x.to_vec();
                        }
                    },
                )
                .unwrap();
                out
            })
            .reduce(
                || vec![0.0; problem.m()],
                |mut acc, x| {
                    for (a, b) in acc.iter_mut().zip(&x) {
                        *a += b;
                    }
                    acc
                },
            );
        let mean: Vec<f64> = sums.iter().map(|v| v / n_runs as f64).collect();
        let rel = linalg::dist(&mean, exact) / linalg::norm(exact);
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn residual_variance_early_decay_rate() {
        // Before the mean iteration reaches its stopping region, the
        // residual variance decays at roughly k^(-2(1-alpha)).
        let problem = crate::problems::gen_phillips(200).unwrap();
        let alpha = 0.1;
        let obs = add_noise(&problem, 5e-3, 2).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), alpha).unwrap();
        let kstar = expected_stop_index(&problem, &obs, 1.2, &schedule, 100_000)
            .unwrap()
            .unwrap();
        let series =
            ensemble_bias_variance(&problem, &obs, &schedule, 200, 2 * kstar, 10, 77).unwrap();
        let fit = fit_rate(&series.iterations, &series.res_variance, (50, kstar)).unwrap();
        let target = -2.0 * (1.0 - alpha);
        assert!(
            (fit.slope - target).abs() <= 0.3,
            "slope {} vs {target}",
            fit.slope
        );
    }

    #[test]
    fn pathwise_report_is_clean() {
        let problem = crate::problems::gen_gravity(20, 0.25).unwrap();
        let obs = add_noise(&problem, 1e-2, 2).unwrap();
        let schedule = StepsizeSchedule::new(default_c0(&problem.matrix).unwrap(), 0.3).unwrap();
        let report = check_pathwise_noise(&problem, &obs, &schedule, 31, 300).unwrap();
        assert_eq!(report.checked_cases, 600);
        assert!(report.is_clean(), "{:?}", report.violations);
    }

    #[test]
    fn expected_stop_index_matches_dense_scan() {
        let problem = toy_problem(6, 0.5, 5);
        let obs = add_noise(&problem, 1e-2, 8).unwrap();
        let schedule = StepsizeSchedule::new(1.0, 0.3).unwrap();
        let k = expected_stop_index(&problem, &obs, 1.2, &schedule, 100_000)
            .unwrap()
            .expect("threshold reachable");
        let traj = expected_sgd_trajectory(&problem, &obs, &schedule, k + 2).unwrap();
        let residual = |x: &[f64]| {
            let ax = problem.matrix.matvec(x).unwrap();
            linalg::dist(&ax, &obs.y_delta)
        };
        let threshold = 1.2 * obs.delta_abs;
        assert!(residual(&traj[k - 1]) <= threshold);
        for (idx, x) in traj.iter().enumerate().take(k - 1) {
            assert!(residual(x) > threshold, "premature at {}", idx + 1);
        }
        // Unreachable threshold within the cap.
        assert_eq!(
            expected_stop_index(&problem, &obs, 1.2, &schedule, 3).unwrap(),
            None
        );
    }
}
