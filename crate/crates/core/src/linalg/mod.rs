//! Dense real linear algebra for moderate problem sizes (up to a few
//! thousand unknowns). Row-major storage; all scalars are `f64`.

mod eigen;

pub use eigen::{matrix_power_apply, sym_eigen, sym_eigenvalues, SpectralDecomposition};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        assert!(nrows >= 1 && ncols >= 1, "matrix dimensions must be >= 1");
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Matrix::zeros(entries.len(), entries.len());
        for (i, &v) in entries.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension {
                context: "Matrix::from_row_major",
                expected: nrows * ncols,
                found: data.len(),
            });
        }
        Ok(Matrix { nrows, ncols, data })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// The `i`-th row as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute difference between `S` and its transpose.
    pub fn symmetry_gap(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut gap: f64 = 0.0;
        for i in 0..self.nrows {
            for j in (i + 1)..self.ncols {
                gap = gap.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        gap
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension {
                context: "matvec",
                expected: self.ncols,
                found: x.len(),
            });
        }
        Ok((0..self.nrows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::Dimension {
                context: "tr_matvec",
                expected: self.nrows,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension {
                context: "matmul",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let mut out = Matrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            let row = self.row(i);
            let orow = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
            for (k, &aik) in row.iter().enumerate() {
                if aik != 0.0 {
                    axpy(aik, other.row(k), orow);
                }
            }
        }
        Ok(out)
    }

    /// `Aᵀ A`.
    pub fn gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.ncols, self.ncols);
        for i in 0..self.nrows {
            let row = self.row(i);
            for j in 0..self.ncols {
                let aij = row[j];
                if aij != 0.0 {
                    axpy(aij, row, &mut out.data[j * self.ncols..(j + 1) * self.ncols]);
                }
            }
        }
        out
    }

    /// `A Aᵀ` (the Gram matrix of the rows).
    pub fn row_gram(&self) -> Matrix {
        let mut out = Matrix::zeros(self.nrows, self.nrows);
        for i in 0..self.nrows {
            let ri = self.row(i);
            for j in i..self.nrows {
                let v = dot(ri, self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Squared Euclidean norm of each row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| norm_sq(self.row(i))).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest singular value, computed from the symmetric eigendecomposition
    /// of the smaller of `AᵀA` and `AAᵀ`. Relative accuracy is at the level
    /// of the eigensolver (better than 1e-10 for the sizes handled here).
    pub fn operator_norm(&self) -> f64 {
        let g = if self.ncols <= self.nrows {
            self.gram()
        } else {
            self.row_gram()
        };
        let eigs = sym_eigenvalues(&g).expect("gram matrix is symmetric by construction");
        eigs.first().copied().unwrap_or(0.0).max(0.0).sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

// Vector helpers. Plain slices keep the call sites light.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matvec_identity_and_zero() {
        let id = Matrix::identity(2);
        assert_eq!(id.matvec(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let z = Matrix::zeros(3, 2);
        assert_eq!(z.matvec(&[1.0, -2.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn matvec_hand_case() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(a.matvec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn operator_norm_cases() {
        assert!((Matrix::identity(5).operator_norm() - 1.0).abs() < 1e-12);
        assert!((Matrix::diag(&[3.0, 1.0]).operator_norm() - 3.0).abs() < 1e-12);
        // Nilpotent 2x2: singular values are 1 and 0.
        let n = Matrix::from_row_major(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((n.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn row_norms_sq_cases() {
        assert_eq!(Matrix::identity(3).row_norms_sq(), vec![1.0, 1.0, 1.0]);
        let a = Matrix::from_row_major(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(a.row_norms_sq(), vec![25.0]);
    }

    #[test]
    fn row_norms_sq_matches_direct_summation() {
        let mut rng = crate::rng::Rng::new(17);
        let a = Matrix::from_fn(5, 3, |_, _| rng.next_standard_normal());
        let rn = a.row_norms_sq();
        for i in 0..5 {
            let direct: f64 = (0..3).map(|j| a[(i, j)] * a[(i, j)]).sum();
            assert!((rn[i] - direct).abs() <= 1e-15 * direct.max(1.0));
        }
    }

    #[test]
    fn gram_and_row_gram_agree_with_matmul() {
        let mut rng = crate::rng::Rng::new(5);
        let a = Matrix::from_fn(4, 3, |_, _| rng.next_standard_normal());
        let at = a.transpose();
        let g = a.gram();
        let g2 = at.matmul(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - g2[(i, j)]).abs() < 1e-12);
            }
        }
        let rg = a.row_gram();
        let rg2 = a.matmul(&at).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rg[(i, j)] - rg2[(i, j)]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn operator_norm_transpose_invariant(values in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let a = Matrix::from_row_major(4, 3, values).unwrap();
            let na = a.operator_norm();
            let nat = a.transpose().operator_norm();
            prop_assert!((na - nat).abs() <= 1e-10 * na.max(1.0));
        }

        #[test]
        fn nonexpansive_contraction(values in proptest::collection::vec(-2.0f64..2.0, 9),
                                    v in proptest::collection::vec(-5.0f64..5.0, 3)) {
            // S = MᵀM is symmetric PSD; with eta = 1/lambda_max, ||(I - eta S) v|| <= ||v||.
            let m = Matrix::from_row_major(3, 3, values).unwrap();
            let s = m.gram();
            let lmax = s.operator_norm();
            prop_assume!(lmax > 1e-8);
            let eta = 1.0 / lmax;
            let sv = s.matvec(&v).unwrap();
            let mut w = v.clone();
            axpy(-eta, &sv, &mut w);
            prop_assert!(norm(&w) <= norm(&v) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
