//! Test problems: discretized Fredholm integral equations of the first kind
//! and a synthetic diagonal problem with an exactly known source
//! representation, plus Gaussian noise injection and file persistence.
//!
//! Exact data is always defined as `y = A x`, so the discrete system is
//! solvable by construction and the minimum-norm solution semantics hold.

pub mod io;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::Rng;

/// A discretized linear inverse problem `A x = y`.
#[derive(Debug)]
pub struct InverseProblem {
    pub name: String,
    pub matrix: Matrix,
    pub x_true: Vec<f64>,
    pub y_true: Vec<f64>,
    /// Generator metadata (kernel depth `d`, source exponent `p`, ...).
    pub params: BTreeMap<String, f64>,
    row_gram: OnceLock<Matrix>,
    operator_norm: OnceLock<f64>,
}

impl Clone for InverseProblem {
    fn clone(&self) -> Self {
        InverseProblem {
            name: self.name.clone(),
            matrix: self.matrix.clone(),
            x_true: self.x_true.clone(),
            y_true: self.y_true.clone(),
            params: self.params.clone(),
            row_gram: OnceLock::new(),
            operator_norm: OnceLock::new(),
        }
    }
}

impl PartialEq for InverseProblem {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.matrix == other.matrix
            && self.x_true == other.x_true
            && self.y_true == other.y_true
            && self.params == other.params
    }
}

impl InverseProblem {
    /// Builds and validates a problem. `y_true` must equal `A x_true` up to
    /// `1e-10` relative.
    pub fn new(
        name: impl Into<String>,
        matrix: Matrix,
        x_true: Vec<f64>,
        y_true: Vec<f64>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let problem = InverseProblem {
            name: name.into(),
            matrix,
            x_true,
            y_true,
            params,
            row_gram: OnceLock::new(),
            operator_norm: OnceLock::new(),
        };
        problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<()> {
        if self.x_true.len() != self.matrix.ncols() {
            return Err(Error::Dimension {
                context: "InverseProblem x_true",
                expected: self.matrix.ncols(),
                found: self.x_true.len(),
            });
        }
        if self.y_true.len() != self.matrix.nrows() {
            return Err(Error::Dimension {
                context: "InverseProblem y_true",
                expected: self.matrix.nrows(),
                found: self.y_true.len(),
            });
        }
        if !self.matrix.all_finite()
            || !linalg::all_finite(&self.x_true)
            || !linalg::all_finite(&self.y_true)
        {
            return Err(Error::InvalidArgument(format!(
                "problem '{}' contains non-finite entries",
                self.name
            )));
        }
        let residual = linalg::dist(&self.matrix.matvec(&self.x_true)?, &self.y_true);
        let scale = linalg::norm(&self.y_true);
        if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "problem '{}': ||A x - y|| = {residual:.3e} exceeds 1e-10 * ||y||",
                self.name
            )));
        }
        Ok(())
    }

    /// Number of data rows.
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of unknowns.
    pub fn m(&self) -> usize {
        self.matrix.ncols()
    }

    /// `A Aᵀ`, cached. Row-action runs use it to maintain the full residual
    /// in `O(n)` per iteration instead of a fresh `O(n m)` evaluation.
    pub fn row_gram(&self) -> &Matrix {
        self.row_gram.get_or_init(|| self.matrix.row_gram())
    }

    /// `AᵀA / n`, the operator governing the mean iteration and the source
    /// condition.
    pub fn normal_matrix(&self) -> Matrix {
        let mut g = self.matrix.gram();
        g.scale(1.0 / self.n() as f64);
        g
    }

    /// Largest singular value of `A`, cached.
    pub fn operator_norm(&self) -> f64 {
        *self
            .operator_norm
            .get_or_init(|| self.matrix.operator_norm())
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

/// A noisy observation of a problem's exact data.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    /// `y + scale * xi`.
    pub y_delta: Vec<f64>,
    /// The standard normal draws before scaling.
    pub xi: Vec<f64>,
    /// Realized noise norm `||y_delta - y_true||`, the value stopping rules use.
    pub delta_abs: f64,
    /// The requested relative level.
    pub delta_rel: f64,
    pub seed: u64,
}

/// Perturbs the exact data with iid Gaussian noise scaled by
/// `delta_rel * max_j |y_j|`. The same `(problem, delta_rel, seed)` triple
/// always produces the same observation.
pub fn add_noise(problem: &InverseProblem, delta_rel: f64, seed: u64) -> Result<NoisyObservation> {
    if !(delta_rel >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relative noise level must be >= 0, got {delta_rel}"
        )));
    }
    let mut rng = Rng::new(seed);
    let xi = rng.standard_normal_vec(problem.n());
    let scale = delta_rel * linalg::max_abs(&problem.y_true);
    let y_delta: Vec<f64> = problem
        .y_true
        .iter()
        .zip(&xi)
        .map(|(y, x)| y + scale * x)
        .collect();
    let delta_abs = linalg::dist(&y_delta, &problem.y_true);
    Ok(NoisyObservation {
        y_delta,
        xi,
        delta_abs,
        delta_rel,
        seed,
    })
}

/// Perturbs the exact data with Gaussian-direction noise rescaled to an
/// exact absolute norm. Used when a bound is to be evaluated at a
/// prescribed noise level rather than a relative one.
pub fn add_noise_exact_norm(
    problem: &InverseProblem,
    delta_abs: f64,
    seed: u64,
) -> Result<NoisyObservation> {
    if !(delta_abs >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "absolute noise level must be >= 0, got {delta_abs}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut xi = rng.standard_normal_vec(problem.n());
    let norm = linalg::norm(&xi);
    if norm == 0.0 {
        return Err(Error::InvalidArgument("degenerate noise draw".into()));
    }
    for x in &mut xi {
        *x *= delta_abs / norm;
    }
    let y_delta: Vec<f64> = problem
        .y_true
        .iter()
        .zip(&xi)
        .map(|(y, x)| y + x)
        .collect();
    let realized = linalg::dist(&y_delta, &problem.y_true);
    let maxy = linalg::max_abs(&problem.y_true);
    Ok(NoisyObservation {
        y_delta,
        xi,
        delta_abs: realized,
        delta_rel: if maxy > 0.0 {
            delta_abs / maxy / (problem.n() as f64).sqrt()
        } else {
            0.0
        },
        seed,
    })
}

fn phillips_kernel(u: f64) -> f64 {
    if u.abs() < 3.0 {
        1.0 + (std::f64::consts::PI * u / 3.0).cos()
    } else {
        0.0
    }
}

/// 16-point Gauss-Legendre nodes and weights on [-1, 1].
const GAUSS16: [(f64, f64); 16] = [
    (-0.9894009349916499, 0.027152459411754037),
    (-0.9445750230732326, 0.062253523938647706),
    (-0.8656312023878318, 0.09515851168249259),
    (-0.755404408355003, 0.12462897125553403),
    (-0.6178762444026438, 0.14959598881657676),
    (-0.45801677765722737, 0.16915651939500262),
    (-0.2816035507792589, 0.1826034150449236),
    (-0.09501250983763745, 0.18945061045506859),
    (0.09501250983763745, 0.18945061045506859),
    (0.2816035507792589, 0.1826034150449236),
    (0.45801677765722737, 0.16915651939500262),
    (0.6178762444026438, 0.14959598881657676),
    (0.755404408355003, 0.12462897125553403),
    (0.8656312023878318, 0.09515851168249259),
    (0.9445750230732326, 0.062253523938647706),
    (0.9894009349916499, 0.027152459411754037),
];

/// Galerkin discretization of the Phillips equation on [-6, 6] with an
/// orthonormal piecewise-constant basis of `n` cells.
///
/// The kernel is `K(s, t) = 1 + cos(pi (s - t) / 3)` for `|s - t| < 3` and
/// zero otherwise; the entries `(1/h) ∫∫ K` are evaluated with a 16-node
/// Gauss-Legendre rule per cell and axis. `n` must be divisible by 4 so the
/// kernel cutoff falls on cell boundaries and every cell integrand is
/// smooth. The matrix depends only on `i - j` and is filled as a symmetric
/// Toeplitz matrix.
pub fn gen_phillips(n: usize) -> Result<InverseProblem> {
    if n < 4 || !n.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!(
            "phillips size must be a positive multiple of 4, got {n}"
        )));
    }
    let h = 12.0 / n as f64;
    // First column of the Toeplitz matrix: offset d = i - j.
    let mut col = vec![0.0; n];
    for (d, entry) in col.iter_mut().enumerate() {
        let shift = d as f64 * h;
        if shift - h >= 3.0 {
            continue;
        }
        let mut sum = 0.0;
        for &(xa, wa) in &GAUSS16 {
            for &(xb, wb) in &GAUSS16 {
                sum += wa * wb * phillips_kernel(shift + h * (xa - xb) / 2.0);
            }
        }
        *entry = h / 4.0 * sum;
    }
    let matrix = Matrix::from_fn(n, n, |i, j| col[i.abs_diff(j)]);
    let sqrt_h = h.sqrt();
    let x_true: Vec<f64> = (0..n)
        .map(|j| sqrt_h * phillips_kernel(-6.0 + (j as f64 + 0.5) * h))
        .collect();
    let y_true = matrix.matvec(&x_true)?;
    InverseProblem::new("phillips", matrix, x_true, y_true, BTreeMap::new())
}

/// Midpoint-quadrature discretization of a one-dimensional gravity surveying
/// kernel `K(s, t) = d (d^2 + (s - t)^2)^{-3/2}` on the unit interval.
pub fn gen_gravity(n: usize, d: f64) -> Result<InverseProblem> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "gravity size must be >= 2, got {n}"
        )));
    }
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gravity depth must be > 0, got {d}"
        )));
    }
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let w = 1.0 / n as f64;
    let matrix = Matrix::from_fn(n, n, |i, j| {
        let diff = grid[i] - grid[j];
        w * d * (d * d + diff * diff).powf(-1.5)
    });
    let x_true: Vec<f64> = grid
        .iter()
        .map(|&t| (std::f64::consts::PI * t).sin() + 0.5 * (2.0 * std::f64::consts::PI * t).sin())
        .collect();
    let y_true = matrix.matvec(&x_true)?;
    let params = BTreeMap::from([("d".to_string(), d)]);
    InverseProblem::new("gravity", matrix, x_true, y_true, params)
}

/// Midpoint-quadrature discretization of a one-dimensional image restoration
/// kernel on [-pi/2, pi/2] (severely ill-posed, nonsmooth solution).
pub fn gen_shaw(n: usize) -> Result<InverseProblem> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "shaw size must be even and >= 2, got {n}"
        )));
    }
    let h = std::f64::consts::PI / n as f64;
    let grid: Vec<f64> = (0..n)
        .map(|i| -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h)
        .collect();
    let matrix = Matrix::from_fn(n, n, |i, j| {
        let (s, t) = (grid[i], grid[j]);
        let u = std::f64::consts::PI * (s.sin() + t.sin());
        let sinc = if u == 0.0 { 1.0 } else { u.sin() / u };
        let c = s.cos() + t.cos();
        h * c * c * sinc * sinc
    });
    let x_true: Vec<f64> = grid
        .iter()
        .map(|&t| 2.0 * (-6.0 * (t - 0.8) * (t - 0.8)).exp() + (-2.0 * (t + 0.5) * (t + 0.5)).exp())
        .collect();
    let y_true = matrix.matvec(&x_true)?;
    InverseProblem::new("shaw", matrix, x_true, y_true, BTreeMap::new())
}

/// The Phillips problem with a smoothed solution: the exact solution is
/// replaced by `AᵀA Aᵀ y` (normalized to unit maximum), which lies deep in
/// the range of the operator and is therefore much smoother relative to `A`
/// than the original one.
pub fn gen_smoothed_phillips(n: usize) -> Result<InverseProblem> {
    let base = gen_phillips(n)?;
    let a = &base.matrix;
    let tmp = a.tr_matvec(&base.y_true)?;
    let tmp = a.matvec(&tmp)?;
    let mut x_true = a.tr_matvec(&tmp)?;
    let peak = linalg::max_abs(&x_true);
    if peak == 0.0 {
        return Err(Error::InvalidArgument(
            "smoothed phillips: degenerate solution".into(),
        ));
    }
    for v in &mut x_true {
        *v /= peak;
    }
    let y_true = a.matvec(&x_true)?;
    InverseProblem::new(
        "smoothed-phillips",
        base.matrix,
        x_true,
        y_true,
        BTreeMap::new(),
    )
}

/// Synthetic diagonal problem `A = diag(k^-decay)` whose exact solution is
/// constructed as `x = B^p w` with `B = AᵀA / m` and `||w|| = w_norm`, so the
/// source representation `(p, w)` is known exactly. The parameters are
/// recorded in `params` under `p`, `decay` and `w_norm`.
pub fn gen_spectral(
    m: usize,
    p: f64,
    decay: f64,
    w_norm: f64,
    seed: u64,
) -> Result<InverseProblem> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "spectral size must be >= 2, got {m}"
        )));
    }
    if !(p > 0.0) || !(decay > 0.0) || !(w_norm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spectral parameters must be positive (p={p}, decay={decay}, w_norm={w_norm})"
        )));
    }
    let singular: Vec<f64> = (1..=m).map(|k| (k as f64).powf(-decay)).collect();
    let mut rng = Rng::new(seed);
    let mut w = rng.standard_normal_vec(m);
    let norm = linalg::norm(&w);
    for v in &mut w {
        *v *= w_norm / norm;
    }
    let x_true: Vec<f64> = singular
        .iter()
        .zip(&w)
        .map(|(&s, &wk)| (s * s / m as f64).powf(p) * wk)
        .collect();
    let matrix = Matrix::diag(&singular);
    let y_true = matrix.matvec(&x_true)?;
    let params = BTreeMap::from([
        ("p".to_string(), p),
        ("decay".to_string(), decay),
        ("w_norm".to_string(), w_norm),
    ]);
    InverseProblem::new("spectral", matrix, x_true, y_true, params)
}

pub use io::{load_problem, save_problem};
