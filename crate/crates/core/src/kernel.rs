//! Separable Gaussian correlation.
//!
//! `K(x, x') = exp(-sum_k (x_k - x'_k)^2 / theta_k)`. Lengthscales are decay
//! rates in squared input units. The nugget is added only to diagonal entries
//! of a set-versus-itself matrix, identified by row index.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::DesignMatrix;
use crate::error::{check_dim, Error, Result};

/// Fixed default nugget.
pub const DEFAULT_NUGGET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelMode {
    /// One lengthscale shared by every input.
    Isotropic,
    /// One lengthscale per input.
    Separable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    lengthscales: Vec<f64>,
    nugget: f64,
}

impl Hyperparams {
    pub fn new(lengthscales: Vec<f64>, nugget: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidHyperparams("no lengthscales"));
        }
        if lengthscales.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidHyperparams("lengthscales must be positive and finite"));
        }
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return Err(Error::InvalidHyperparams("nugget must be nonnegative"));
        }
        Ok(Self { lengthscales, nugget })
    }

    pub fn isotropic(theta: f64, dim: usize, nugget: f64) -> Result<Self> {
        Self::new(vec![theta; dim], nugget)
    }

    /// Unit lengthscales with the default nugget: the natural start on
    /// prescaled inputs.
    pub fn unit(dim: usize) -> Self {
        Self { lengthscales: vec![1.0; dim], nugget: DEFAULT_NUGGET }
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn with_nugget(&self, nugget: f64) -> Result<Self> {
        Self::new(self.lengthscales.clone(), nugget)
    }

    pub fn with_lengthscales(&self, lengthscales: Vec<f64>) -> Result<Self> {
        Self::new(lengthscales, self.nugget)
    }

    /// Geometric mean of the lengthscales.
    pub fn geometric_mean(&self) -> f64 {
        let s: f64 = self.lengthscales.iter().map(|t| libm::log(*t)).sum();
        libm::exp(s / self.lengthscales.len() as f64)
    }
}

/// Correlation between two locations, without nugget.
pub fn correlation(x: &[f64], y: &[f64], hyper: &Hyperparams) -> Result<f64> {
    check_dim(hyper.dim(), x.len())?;
    check_dim(hyper.dim(), y.len())?;
    Ok(corr(x, y, hyper.lengthscales()))
}

#[inline]
pub(crate) fn corr(x: &[f64], y: &[f64], lengthscales: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((a, b), t) in x.iter().zip(y).zip(lengthscales) {
        let d = a - b;
        s += d * d / t;
    }
    libm::exp(-s)
}

/// Correlation matrix of a design with itself, nugget on the diagonal.
pub fn correlation_matrix(design: &DesignMatrix, hyper: &Hyperparams) -> Result<Vec<f64>> {
    check_dim(hyper.dim(), design.dim())?;
    let n = design.rows();
    let ls = hyper.lengthscales();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0 + hyper.nugget();
        for j in 0..i {
            let v = corr(design.row(i), design.row(j), ls);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Correlations of `x` with every row of `design`.
pub(crate) fn cross_correlations(design: &DesignMatrix, x: &[f64], lengthscales: &[f64]) -> Vec<f64> {
    design.iter_rows().map(|r| corr(r, x, lengthscales)).collect()
}

/// Derivative of `K(x, y)` with respect to coordinate `l` of `x`.
#[inline]
pub(crate) fn corr_dx(x: &[f64], y: &[f64], lengthscales: &[f64], l: usize, k: f64) -> f64 {
    -2.0 * (x[l] - y[l]) / lengthscales[l] * k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_values() {
        let h = Hyperparams::new(vec![1.0], 0.0).unwrap();
        assert!((correlation(&[0.0], &[1.0], &h).unwrap() - libm::exp(-1.0)).abs() < 1e-15);
        let h = Hyperparams::new(vec![2.0, 1.0], 0.0).unwrap();
        let v = correlation(&[0.0, 0.0], &[1.0, 1.0], &h).unwrap();
        assert!((v - 0.223_130_160_148_429_83).abs() < 1e-12);
    }

    #[test]
    fn nugget_only_on_diagonal_by_index() {
        let h = Hyperparams::new(vec![1.0], 1e-6).unwrap();
        // two coincident rows: off-diagonal stays 1
        let d = DesignMatrix::from_rows(&[[0.3], [0.3]]).unwrap();
        let k = correlation_matrix(&d, &h).unwrap();
        assert_eq!(k, vec![1.0 + 1e-6, 1.0, 1.0, 1.0 + 1e-6]);
    }

    #[test]
    fn errors() {
        assert!(Hyperparams::new(vec![0.0], 0.0).is_err());
        assert!(Hyperparams::new(vec![1.0], -1.0).is_err());
        let h = Hyperparams::new(vec![1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            correlation(&[0.0], &[0.0, 1.0], &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
