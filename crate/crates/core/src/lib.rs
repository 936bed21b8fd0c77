//! Iterative solvers for discretized linear inverse problems `A x = y`,
//! stopped by the Morozov discrepancy principle.
//!
//! The crate provides:
//!
//! * [`solvers`] — row-action stochastic gradient descent with polynomially
//!   decaying stepsizes, the classical Landweber iteration, and the exact
//!   mean iteration of SGD (a Landweber recursion with diminishing steps);
//! * [`stopping`] — the discrepancy principle with configurable `tau` and
//!   residual check frequency, a priori index rules, and closed-form upper
//!   bounds on stopping indices under a source condition;
//! * [`problems`] — classic Fredholm test problems (`phillips`, `gravity`,
//!   `shaw`, a smoothed variant of `phillips`) plus a synthetic diagonal
//!   problem with an exactly known source representation, Gaussian noise
//!   injection, and MatrixMarket-based persistence;
//! * [`analysis`] — numerical verification of the decay/variance estimates
//!   behind the stopping theory and Monte-Carlo bias–variance decomposition;
//! * [`harness`] — reproducible ensemble experiments (mean error and stopping
//!   epoch tables, independent-run comparison, bias–variance series, bound
//!   sweeps) with CSV/plain-table output.
//!
//! Everything is deterministic given the seeds: the random number generator
//! is pinned (see [`rng`]), and ensemble aggregation is order-independent of
//! the scheduling, so repeated runs produce byte-identical output.
//!
//! Start with the `examples/` directory; each example is a small runnable
//! program exercising one capability. A thin `morozov` binary exposes the
//! same experiments as subcommands.

// Float domain guards are written `!(x > 0.0)` so NaN fails validation too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod solvers;
pub mod stopping;

pub use error::{Error, Result};
