//! Stopping rules for iterative regularization: the discrepancy principle
//! with a residual check frequency, a priori index rules, and closed-form
//! upper bounds on stopping indices under a polynomial source condition.

use crate::error::{Error, Result};

/// Discrepancy principle: stop at the first checked iterate whose residual
/// satisfies `||A x_k - y|| <= tau * delta`. The comparison is inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyRule {
    /// Over-relaxation constant, strictly greater than one.
    pub tau: f64,
    /// Noise norm `||y_delta - y_true||`.
    pub delta: f64,
    /// Residuals are evaluated at `k = 1` and every `check_frequency`-th iterate.
    pub check_frequency: usize,
    /// Budget; exceeding it stops the run without satisfying the principle.
    pub max_iterations: usize,
}

impl DiscrepancyRule {
    pub fn new(tau: f64, delta: f64, check_frequency: usize, max_iterations: usize) -> Result<Self> {
        if !(tau > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discrepancy principle requires tau > 1, got {tau}"
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise level must be >= 0, got {delta}"
            )));
        }
        if check_frequency == 0 || max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "check frequency and iteration budget must be >= 1".into(),
            ));
        }
        Ok(DiscrepancyRule {
            tau,
            delta,
            check_frequency,
            max_iterations,
        })
    }

    /// The residual threshold `tau * delta`.
    pub fn threshold(&self) -> f64 {
        self.tau * self.delta
    }
}

/// Whether the rule evaluates the residual at iterate `k`.
///
/// # Panics
/// Panics if `k == 0`; iterates are indexed from 1.
pub fn dp_should_check(rule: &DiscrepancyRule, k: usize) -> bool {
    assert!(k >= 1, "iterates are indexed from 1");
    k == 1 || k.is_multiple_of(rule.check_frequency)
}

/// Outcome of a residual check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    /// The residual dropped to `tau * delta`.
    Discrepancy,
    /// The budget is exhausted without reaching the threshold.
    BudgetExhausted,
}

impl StopDecision {
    pub fn stops(self) -> bool {
        self != StopDecision::Continue
    }
}

/// Applies the discrepancy test at a checked iterate.
///
/// # Panics
/// Panics if the residual is negative or `k` is not a checked index.
pub fn dp_decide(rule: &DiscrepancyRule, k: usize, residual_norm: f64) -> StopDecision {
    assert!(residual_norm >= 0.0, "residual norm must be nonnegative");
    assert!(dp_should_check(rule, k), "iterate {k} is not checked");
    if residual_norm <= rule.threshold() {
        StopDecision::Discrepancy
    } else if k >= rule.max_iterations {
        StopDecision::BudgetExhausted
    } else {
        StopDecision::Continue
    }
}

/// A priori stopping index `ceil(c * delta^(-2 / ((1 - alpha)(2p + 1))))`
/// tied to the noise level and the source exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct APrioriRule {
    pub c: f64,
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl APrioriRule {
    pub fn new(c: f64, p: f64, alpha: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0) || !(p > 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "a priori rule requires c, p, delta > 0 (c={c}, p={p}, delta={delta})"
            )));
        }
        if !(alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "a priori rule requires alpha < 1, got {alpha}"
            )));
        }
        Ok(APrioriRule { c, p, alpha, delta })
    }

    /// The deterministic stopping index (at least 1).
    pub fn stop_index(&self) -> usize {
        let exponent = -2.0 / ((1.0 - self.alpha) * (2.0 * self.p + 1.0));
        let raw = self.c * self.delta.powf(exponent);
        (raw.ceil() as usize).max(1)
    }
}

/// Decay-envelope constant `((p+s)(1-alpha) / (c0 e (2^{1-alpha} - 1)))^{p+s} * ||w||`
/// appearing in the mean-iteration error bounds under the source condition
/// `x - x_1 = B^p w`. `p_plus_s` is the total exponent `p + s`.
pub fn decay_constant(p_plus_s: f64, alpha: f64, c0: f64, w_norm: f64) -> Result<f64> {
    check_schedule_domain(alpha, c0)?;
    if !(p_plus_s >= 0.0) || !(w_norm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decay constant requires p + s >= 0 and ||w|| >= 0 (got {p_plus_s}, {w_norm})"
        )));
    }
    let base =
        (p_plus_s * (1.0 - alpha)) / (c0 * std::f64::consts::E * (2f64.powf(1.0 - alpha) - 1.0));
    Ok(base.powf(p_plus_s) * w_norm)
}

fn check_schedule_domain(alpha: f64, c0: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires 0 < alpha < 1, got {alpha}"
        )));
    }
    if !(c0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires c0 > 0, got {c0}"
        )));
    }
    Ok(())
}

/// Upper bound on the discrepancy-principle stopping index of the mean
/// iteration (the Landweber sequence with diminishing steps):
/// `((tau* - 1) delta / (sqrt(n) c_p))^{-2/((1-alpha)(2p+1))} + 2`,
/// where `c_p` is [`decay_constant`] at exponent `p + 1/2`.
pub fn landweber_stop_index_bound(
    delta: f64,
    tau_star: f64,
    n: usize,
    p: f64,
    alpha: f64,
    c0: f64,
    w_norm: f64,
) -> Result<f64> {
    if !(tau_star > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires tau* > 1, got {tau_star}"
        )));
    }
    if !(delta > 0.0) || !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires delta > 0 and p > 0 (delta={delta}, p={p})"
        )));
    }
    let cp = decay_constant(p + 0.5, alpha, c0, w_norm)?;
    let scaled = (tau_star - 1.0) * delta / ((n as f64).sqrt() * cp);
    let exponent = -2.0 / ((1.0 - alpha) * (2.0 * p + 1.0));
    Ok(scaled.powf(exponent) + 2.0)
}

/// High-probability upper bound on the discrepancy-principle stopping index
/// of the stochastic iteration: `c * delta^{-2/((1-alpha)(min(2p, r)+1))}`
/// with `c = ((tau* - 1) / (sqrt(n) c_p))^{-2/((1-alpha)(min(2p,r)+1))} + 2`.
/// Requires `tau > tau* > 1` and `0 < r < 1`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_stop_index_bound(
    delta: f64,
    tau: f64,
    tau_star: f64,
    n: usize,
    p: f64,
    r: f64,
    alpha: f64,
    c0: f64,
    w_norm: f64,
) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires 0 < r < 1, got {r}"
        )));
    }
    if !(tau > tau_star && tau_star > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires tau > tau* > 1 (tau={tau}, tau*={tau_star})"
        )));
    }
    if !(delta > 0.0) || !(p > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound requires delta > 0 and p > 0 (delta={delta}, p={p})"
        )));
    }
    let cp = decay_constant(p + 0.5, alpha, c0, w_norm)?;
    let exponent = -2.0 / ((1.0 - alpha) * (2.0 * p.min(r / 2.0) + 1.0));
    let c = ((tau_star - 1.0) / ((n as f64).sqrt() * cp)).powf(exponent) + 2.0;
    Ok(c * delta.powf(exponent))
}
