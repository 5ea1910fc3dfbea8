//! Small dense linear algebra: a growable packed Cholesky factor and the
//! triangular solves built on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Relative pivot tolerance: a squared pivot `d2` is accepted only when
/// `d2 > PIVOT_TOL * a_ii`.
pub const PIVOT_TOL: f64 = 1e-14;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor stored packed by rows, so that appending
/// a row (a rank-one extension of the factored matrix) is a plain push.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    packed: Vec<f64>,
    n: usize,
}

impl Cholesky {
    pub fn empty() -> Self {
        Self { packed: Vec::new(), n: 0 }
    }

    /// Factor a symmetric `n x n` row-major matrix. Only the lower triangle
    /// is read.
    pub fn factor(matrix: &[f64], n: usize) -> Result<Self> {
        if matrix.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: matrix.len() });
        }
        let mut chol = Self { packed: Vec::with_capacity(n * (n + 1) / 2), n: 0 };
        for i in 0..n {
            let row = &matrix[i * n..i * n + i];
            chol.push_row(row, matrix[i * n + i]).map_err(|_| Error::NotPositiveDefinite { pivot: i })?;
        }
        Ok(chol)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.packed[i * (i + 1) / 2 + j]
    }

    /// Extend the factored matrix by one row/column: `cross` holds the new
    /// off-diagonal entries and `diag` the new diagonal entry. On failure the
    /// factor is left untouched.
    pub fn push_row(&mut self, cross: &[f64], diag: f64) -> Result<()> {
        if cross.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: cross.len() });
        }
        let l = self.solve_lower(cross);
        let d2 = diag - dot(&l, &l);
        if !(d2 > PIVOT_TOL * diag.abs()) || !d2.is_finite() {
            return Err(Error::Breakdown(d2));
        }
        self.packed.extend_from_slice(&l);
        self.packed.push(libm::sqrt(d2));
        self.n += 1;
        Ok(())
    }

    /// Solve `L x = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] = (x[i] - s) / row[i];
        }
    }

    /// Solve `L^T x = b`.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in (0..self.n).rev() {
            x[i] /= self.get(i, i);
            let xi = x[i];
            let row = self.row(i);
            for (xk, lik) in x[..i].iter_mut().zip(&row[..i]) {
                *xk -= lik * xi;
            }
        }
    }

    /// Solve `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| libm::log(self.get(i, i))).sum::<f64>()
    }

    /// Dense inverse of the factored matrix, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // columns of L^{-1}
        let mut linv = vec![0.0; n * n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            self.solve_lower_in_place(&mut e);
            for i in 0..n {
                linv[i * n + j] = e[i];
            }
        }
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                // (L^{-T} L^{-1})_{ij} = sum_k Linv_{ki} Linv_{kj}, Linv lower
                let s: f64 = (i..n).map(|k| linv[k * n + i] * linv[k * n + j]).sum();
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }

    /// Multiply `L z` for a vector `z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), &z[..=i])).collect()
    }
}

/// Factor a covariance matrix, adding `base * 10^k` jitter (k = 0..=3,
/// `base = 1e-10 * trace / m`) to the diagonal when plain factoring fails.
pub fn cholesky_with_jitter(matrix: &[f64], m: usize) -> Result<Cholesky> {
    if let Ok(c) = Cholesky::factor(matrix, m) {
        return Ok(c);
    }
    let trace: f64 = (0..m).map(|i| matrix[i * m + i]).sum();
    let mut jitter = 1e-10 * trace.abs().max(f64::MIN_POSITIVE) / m as f64;
    let mut work = matrix.to_vec();
    for _ in 0..=3 {
        for i in 0..m {
            work[i * m + i] = matrix[i * m + i] + jitter;
        }
        if let Ok(c) = Cholesky::factor(&work, m) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Vec<f64> {
        vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]
    }

    #[test]
    fn factor_reproduces_matrix() {
        let a = spd3();
        let c = Cholesky::factor(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| c.get(i, k) * c.get(j, k)).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn solve_and_inverse() {
        let a = spd3();
        let c = Cholesky::factor(&a, 3).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((r - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let det = 4.0 * (5.0 * 3.0 - 1.0) - 2.0 * (2.0 * 3.0 - 0.6) + 0.6 * (2.0 - 5.0 * 0.6);
        assert!((c.log_det() - libm::log(det)).abs() < 1e-12);
    }

    #[test]
    fn push_row_matches_full_factor() {
        let a = spd3();
        let mut c = Cholesky::factor(&[4.0, 2.0, 2.0, 5.0], 2).unwrap();
        c.push_row(&[0.6, 1.0], 3.0).unwrap();
        assert_eq!(c, Cholesky::factor(&a, 3).unwrap());
    }

    #[test]
    fn singular_rejected_and_untouched() {
        let mut c = Cholesky::factor(&[1.0], 1).unwrap();
        let before = c.clone();
        assert!(matches!(c.push_row(&[1.0], 1.0), Err(Error::Breakdown(_))));
        assert_eq!(c, before);
        assert!(matches!(
            Cholesky::factor(&[1.0, 1.0, 1.0, 1.0], 2),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn jitter_rescues_rank_deficient() {
        let c = cholesky_with_jitter(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(c.dim(), 2);
    }
}
