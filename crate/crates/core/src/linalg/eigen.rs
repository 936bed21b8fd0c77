//! Symmetric eigendecomposition via Householder reduction to tridiagonal
//! form followed by the implicit-shift QL iteration (the classical
//! EISPACK `tred2`/`tql2` pair). Eigenvalues are returned in nonincreasing
//! order with matching orthonormal eigenvector columns.

use super::Matrix;
use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`sym_eigen`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues below `EIG_FLOOR_REL * lambda_max` are treated as zero when
/// forming fractional powers, so round-off noise on a positive semidefinite
/// spectrum cannot produce NaN.
pub const EIG_FLOOR_REL: f64 = 1e-14;

/// Eigendecomposition `S = V diag(lambda) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: Matrix,
}

impl SpectralDecomposition {
    /// Eigenvalues in nonincreasing order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors, one per column, matching [`Self::eigenvalues`].
    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// The zero threshold used for fractional powers.
    pub fn eigenvalue_floor(&self) -> f64 {
        EIG_FLOOR_REL * self.max_eigenvalue().max(0.0)
    }

    /// Coordinates of `v` in the eigenbasis, i.e. `Vᵀ v`.
    pub fn coords(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.vectors.tr_matvec(v)
    }

    /// Reconstructs a vector from eigenbasis coordinates, i.e. `V c`.
    pub fn from_coords(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.vectors.matvec(c)
    }

    /// Applies `S^p` to `v` through the decomposition.
    ///
    /// Eigenvalues at or below the floor contribute zero for `p != 0`; this
    /// gives pseudo-inverse semantics for negative `p`. `p == 0` returns `v`
    /// unchanged (every eigenvalue, including zero, is raised to the zeroth
    /// power).
    pub fn apply_power(&self, p: f64, v: &[f64]) -> Result<Vec<f64>> {
        if p == 0.0 {
            if v.len() != self.dim() {
                return Err(Error::Dimension {
                    context: "apply_power",
                    expected: self.dim(),
                    found: v.len(),
                });
            }
            return Ok(v.to_vec());
        }
        let floor = self.eigenvalue_floor();
        let mut c = self.coords(v)?;
        for (cl, &lambda) in c.iter_mut().zip(&self.eigenvalues) {
            *cl *= if lambda > floor { lambda.powf(p) } else { 0.0 };
        }
        self.from_coords(&c)
    }

    /// `V diag(lambda) Vᵀ`, for verifying reconstruction accuracy.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut sum = 0.0;
                for (l, &lambda) in self.eigenvalues.iter().enumerate() {
                    sum += self.vectors[(i, l)] * lambda * self.vectors[(j, l)];
                }
                out[(i, j)] = sum;
            }
        }
        out
    }

    /// Number of eigenvalues exceeding `tol * lambda_max` in absolute value.
    pub fn rank(&self, tol: f64) -> usize {
        let scale = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        self.eigenvalues
            .iter()
            .filter(|v| v.abs() > tol * scale)
            .count()
    }
}

fn check_symmetric(s: &Matrix, context: &str) -> Result<()> {
    if !s.is_square() {
        return Err(Error::InvalidArgument(format!(
            "{context}: matrix is {}x{}, expected square",
            s.nrows(),
            s.ncols()
        )));
    }
    let gap = s.symmetry_gap();
    let scale = s.max_abs();
    if gap > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!(
            "{context}: matrix is not symmetric (gap {gap:.3e}, scale {scale:.3e})"
        )));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eigen(s: &Matrix) -> Result<SpectralDecomposition> {
    check_symmetric(s, "sym_eigen")?;
    let n = s.nrows();
    let mut z = s.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e, true);
    tql(&mut d, &mut e, Some(&mut z))?;
    // Sort nonincreasing, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| z[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
    })
}

/// Eigenvalues only, in nonincreasing order. Cheaper than [`sym_eigen`]
/// because no transformations are accumulated.
pub fn sym_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(s, "sym_eigenvalues")?;
    let n = s.nrows();
    let mut z = s.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut z, &mut d, &mut e, false);
    tql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(d)
}

/// Applies `S^p v` for symmetric positive semidefinite `S` and `p >= 0`.
///
/// The symmetry of `S` is validated; eigenvalues below the floor are treated
/// as exact zeros (with the convention `0^0 = 1`).
pub fn matrix_power_apply(s: &Matrix, p: f64, v: &[f64]) -> Result<Vec<f64>> {
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "matrix_power_apply: power must be >= 0, got {p}"
        )));
    }
    if v.len() != s.ncols() {
        return Err(Error::Dimension {
            context: "matrix_power_apply",
            expected: s.ncols(),
            found: v.len(),
        });
    }
    sym_eigen(s)?.apply_power(p, v)
}

/// Householder reduction of `z` to tridiagonal form (diagonal `d`,
/// subdiagonal `e[1..]`). With `accumulate`, `z` is overwritten by the
/// orthogonal transformation matrix.
fn tred2(z: &mut Matrix, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..i {
                scale += z[(i, k)].abs();
            }
            if scale == 0.0 {
                e[i] = z[(i, l)];
            } else {
                for k in 0..i {
                    z[(i, k)] /= scale;
                    h += z[(i, k)] * z[(i, k)];
                }
                let f = z[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[(i, l)] = f - g;
                let mut fsum = 0.0;
                for j in 0..i {
                    if accumulate {
                        z[(j, i)] = z[(i, j)] / h;
                    }
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[(j, k)] * z[(i, k)];
                    }
                    for k in (j + 1)..i {
                        g += z[(k, j)] * z[(i, k)];
                    }
                    e[j] = g / h;
                    fsum += e[j] * z[(i, j)];
                }
                let hh = fsum / (h + h);
                for j in 0..i {
                    let f = z[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * z[(i, k)];
                        z[(j, k)] -= delta;
                    }
                }
            }
        } else {
            e[i] = z[(i, l)];
        }
        d[i] = h;
    }
    if accumulate {
        d[0] = 0.0;
    }
    e[0] = 0.0;
    for i in 0..n {
        if accumulate {
            if d[i] != 0.0 {
                for j in 0..i {
                    let mut g = 0.0;
                    for k in 0..i {
                        g += z[(i, k)] * z[(k, j)];
                    }
                    for k in 0..i {
                        let delta = g * z[(k, i)];
                        z[(k, j)] -= delta;
                    }
                }
            }
            d[i] = z[(i, i)];
            z[(i, i)] = 1.0;
            for j in 0..i {
                z[(j, i)] = 0.0;
                z[(i, j)] = 0.0;
            }
        } else {
            d[i] = z[(i, i)];
        }
    }
}

/// Implicit-shift QL iteration on a tridiagonal matrix. Rotations are
/// applied to the columns of `z` when present.
fn tql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut Matrix>) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::InvalidArgument(
                    "eigensolver failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    let nrows = zm.nrows();
                    for k in 0..nrows {
                        let f = zm[(k, i + 1)];
                        zm[(k, i + 1)] = s * zm[(k, i)] + c * f;
                        zm[(k, i)] = c * zm[(k, i)] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};
    use proptest::prelude::*;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::Rng::new(seed);
        let m = Matrix::from_fn(n, n, |_, _| rng.next_standard_normal());
        m.gram()
    }

    fn assert_valid_decomposition(s: &Matrix, dec: &SpectralDecomposition, tol: f64) {
        let n = s.nrows();
        let scale = s.max_abs().max(1e-300);
        let rec = dec.reconstruct();
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (rec[(i, j)] - s[(i, j)]).abs() <= tol * scale,
                    "reconstruction off at ({i},{j}): {} vs {}",
                    rec[(i, j)],
                    s[(i, j)]
                );
            }
        }
        // Orthonormal columns.
        let v = dec.vectors();
        for a in 0..n {
            for b in a..n {
                let col_a: Vec<f64> = (0..n).map(|k| v[(k, a)]).collect();
                let col_b: Vec<f64> = (0..n).map(|k| v[(k, b)]).collect();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&col_a, &col_b) - expected).abs() < 1e-12);
            }
        }
        // Nonincreasing.
        for w in dec.eigenvalues().windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn decomposes_small_known_matrix() {
        // Eigenvalues of [[2,1],[1,2]] are 3 and 1.
        let s = Matrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let dec = sym_eigen(&s).unwrap();
        assert!((dec.eigenvalues()[0] - 3.0).abs() < 1e-12);
        assert!((dec.eigenvalues()[1] - 1.0).abs() < 1e-12);
        assert_valid_decomposition(&s, &dec, 1e-12);
    }

    #[test]
    fn decomposes_random_matrices() {
        for (i, n) in [1usize, 2, 3, 5, 12, 40].iter().enumerate() {
            let s = random_symmetric(*n, 100 + i as u64);
            let dec = sym_eigen(&s).unwrap();
            assert_valid_decomposition(&s, &dec, 1e-10);
            let vals = sym_eigenvalues(&s).unwrap();
            for (a, b) in vals.iter().zip(dec.eigenvalues()) {
                assert!((a - b).abs() <= 1e-10 * s.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn handles_diagonal_and_zero() {
        let s = Matrix::diag(&[5.0, -1.0, 2.0]);
        let dec = sym_eigen(&s).unwrap();
        assert!((dec.eigenvalues()[0] - 5.0).abs() < 1e-14);
        assert!((dec.eigenvalues()[2] + 1.0).abs() < 1e-14);
        let z = Matrix::zeros(4, 4);
        let dec = sym_eigen(&z).unwrap();
        assert!(dec.eigenvalues().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_symmetric() {
        let s = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(sym_eigen(&s).is_err());
        assert!(matrix_power_apply(&s, 1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn power_identity_and_diagonal_sqrt() {
        let s = random_symmetric(4, 9);
        let v = vec![1.0, -2.0, 0.5, 3.0];
        let same = matrix_power_apply(&s, 0.0, &v).unwrap();
        assert_eq!(same, v);

        let s = Matrix::diag(&[4.0, 9.0]);
        let r = matrix_power_apply(&s, 0.5, &[1.0, 1.0]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12);
        assert!((r[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_two_matches_double_matvec() {
        let s = random_symmetric(3, 23);
        let v = vec![0.3, -1.0, 2.0];
        let via_power = matrix_power_apply(&s, 2.0, &v).unwrap();
        let direct = s.matvec(&s.matvec(&v).unwrap()).unwrap();
        let scale = norm(&direct).max(1.0);
        for (a, b) in via_power.iter().zip(&direct) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn negative_power_rejected_by_contract_api() {
        let s = Matrix::diag(&[1.0, 2.0]);
        assert!(matrix_power_apply(&s, -1.0, &[1.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn power_semigroup(seed in 0u64..1000, p in 0.0f64..2.0, q in 0.0f64..2.0) {
            let s = random_symmetric(5, seed);
            let dec = sym_eigen(&s).unwrap();
            let mut rng = crate::rng::Rng::new(seed ^ 0xabc);
            let v: Vec<f64> = (0..5).map(|_| rng.next_standard_normal()).collect();
            let combined = dec.apply_power(p + q, &v).unwrap();
            let staged = dec.apply_power(p, &dec.apply_power(q, &v).unwrap()).unwrap();
            let scale = norm(&combined).max(norm(&v)).max(1.0);
            for (a, b) in combined.iter().zip(&staged) {
                prop_assert!((a - b).abs() <= 1e-8 * scale);
            }
        }
    }
}
