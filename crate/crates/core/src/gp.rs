//! Dense zero-mean Gaussian process with the scale `tau^2` profiled out.
//!
//! With `K` the correlation matrix of the design (nugget on the diagonal) and
//! `psi = y^T K^{-1} y`, the predictive law at `x` is Student-t with `N`
//! degrees of freedom, location `k(x)^T K^{-1} y` and scale
//! `psi [K(x, x) + nugget - k(x)^T K^{-1} k(x)] / N`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::design::DesignMatrix;
use crate::error::{check_dim, Error, Result};
use crate::kernel::{corr, correlation_matrix, cross_correlations, Hyperparams};
use crate::linalg::{dot, Cholesky};

/// Pointwise Student-t predictive summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Student-t scale (squared); never negative.
    pub scale2: f64,
    /// Degrees of freedom, equal to the training size.
    pub dof: usize,
    /// `scale2 * dof / (dof - 2)`, or `+inf` when `dof <= 2`.
    pub variance: f64,
}

impl Prediction {
    pub fn new(mean: f64, scale2: f64, dof: usize) -> Self {
        let scale2 = scale2.max(0.0);
        Self { mean, scale2, dof, variance: student_variance(scale2, dof) }
    }
}

pub(crate) fn student_variance(scale2: f64, dof: usize) -> f64 {
    if dof > 2 {
        scale2 * dof as f64 / (dof as f64 - 2.0)
    } else {
        f64::INFINITY
    }
}

/// Joint predictive law over a set of locations: multivariate Student-t with
/// location `mean`, scale matrix `cov` (row-major `size x size`) and `dof`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPrediction {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    pub size: usize,
    pub dof: usize,
}

impl JointPrediction {
    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.size + j]
    }

    /// Scale matrix multiplied by `dof / (dof - 2)`.
    pub fn variance_matrix(&self) -> Vec<f64> {
        let f = student_variance(1.0, self.dof);
        self.cov.iter().map(|c| c * f).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.cov_at(i, i)).collect()
    }
}

/// Fitted GP. Immutable once built; [`GpModel::extend`] returns a new model.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    design: DesignMatrix,
    responses: Vec<f64>,
    hyper: Hyperparams,
    chol: Cholesky,
    /// `L^{-1} y`
    whitened: Vec<f64>,
    alpha: Vec<f64>,
    psi: f64,
}

impl GpModel {
    pub fn build(design: DesignMatrix, responses: Vec<f64>, hyper: Hyperparams) -> Result<Self> {
        check_dim(design.rows(), responses.len())?;
        check_dim(hyper.dim(), design.dim())?;
        if responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("responses contain a non-finite value"));
        }
        let k = correlation_matrix(&design, &hyper)?;
        let chol = Cholesky::factor(&k, design.rows())?;
        let whitened = chol.solve_lower(&responses);
        let mut model =
            Self { design, responses, hyper, chol, whitened, alpha: Vec::new(), psi: 0.0 };
        model.refresh_solves();
        Ok(model)
    }

    /// Like [`GpModel::build`] but multiplies a positive nugget by ten (at
    /// most three times) when the factorization fails. Returns the number of
    /// raises applied.
    pub fn build_with_escalation(
        design: DesignMatrix,
        responses: Vec<f64>,
        hyper: Hyperparams,
    ) -> Result<(Self, u32)> {
        let mut hyper = hyper;
        let mut raises = 0;
        loop {
            match Self::build(design.clone(), responses.clone(), hyper.clone()) {
                Ok(m) => return Ok((m, raises)),
                Err(Error::NotPositiveDefinite { .. }) if raises < 3 && hyper.nugget() > 0.0 => {
                    hyper = hyper.with_nugget(hyper.nugget() * 10.0)?;
                    raises += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn refresh_solves(&mut self) {
        self.psi = dot(&self.whitened, &self.whitened);
        let mut alpha = self.whitened.clone();
        self.chol.solve_upper_in_place(&mut alpha);
        self.alpha = alpha;
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `K^{-1} y`
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `y^T K^{-1} y`
    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn len(&self) -> usize {
        self.design.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Log of `Gamma(N/2) (2 pi)^{-N/2} |K|^{-1/2} (psi/2)^{-N/2}`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        libm::lgamma(n / 2.0)
            - 0.5 * n * libm::log(2.0 * PI)
            - 0.5 * self.chol.log_det()
            - 0.5 * n * libm::log(self.psi / 2.0)
    }

    /// Gradient of [`GpModel::log_likelihood`] with respect to
    /// `log(theta_k)`, one entry per input dimension.
    pub fn log_likelihood_gradient(&self) -> Vec<f64> {
        let n = self.len();
        let p = self.design.dim();
        let ls = self.hyper.lengthscales();
        let kinv = self.chol.inverse();
        let mut trace = vec![0.0; p];
        let mut quad = vec![0.0; p];
        for i in 0..n {
            let xi = self.design.row(i);
            for j in 0..i {
                let xj = self.design.row(j);
                let kij = corr(xi, xj, ls);
                let wt = 2.0 * kinv[i * n + j];
                let wq = 2.0 * self.alpha[i] * self.alpha[j];
                for k in 0..p {
                    let d = xi[k] - xj[k];
                    let dk = kij * d * d / ls[k];
                    trace[k] += wt * dk;
                    quad[k] += wq * dk;
                }
            }
        }
        let half_n = 0.5 * n as f64;
        (0..p).map(|k| -0.5 * trace[k] + half_n * quad[k] / self.psi).collect()
    }

    /// Correlations between `x` and the design rows.
    pub fn cross(&self, x: &[f64]) -> Vec<f64> {
        cross_correlations(&self.design, x, self.hyper.lengthscales())
    }

    /// `K(x, x) + nugget - k(x)^T K^{-1} k(x)`, the predictive variance
    /// with `psi / N` left out. Clamped at zero.
    pub fn unscaled_variance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.design.dim(), x.len())?;
        let z = self.chol.solve_lower(&self.cross(x));
        Ok((1.0 + self.hyper.nugget() - dot(&z, &z)).max(0.0))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        check_dim(self.design.dim(), x.len())?;
        let k = self.cross(x);
        let mean = dot(&k, &self.alpha);
        let z = self.chol.solve_lower(&k);
        let n = self.len();
        let scale2 = self.psi * (1.0 + self.hyper.nugget() - dot(&z, &z)) / n as f64;
        Ok(Prediction::new(mean, scale2, n))
    }

    /// Joint predictive law over the rows of `points`. The nugget enters the
    /// diagonal only (by index within `points`).
    pub fn predict_joint(&self, points: &DesignMatrix) -> Result<JointPrediction> {
        check_dim(self.design.dim(), points.dim())?;
        let m = points.rows();
        let n = self.len();
        let ls = self.hyper.lengthscales();
        let mut mean = Vec::with_capacity(m);
        let mut z = Vec::with_capacity(m);
        for w in points.iter_rows() {
            let k = self.cross(w);
            mean.push(dot(&k, &self.alpha));
            z.push(self.chol.solve_lower(&k));
        }
        let f = self.psi / n as f64;
        let mut cov = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let prior = if i == j {
                    1.0 + self.hyper.nugget()
                } else {
                    corr(points.row(i), points.row(j), ls)
                };
                let c = f * (prior - dot(&z[i], &z[j]));
                cov[i * m + j] = c;
                cov[j * m + i] = c;
            }
            cov[i * m + i] = cov[i * m + i].max(0.0);
        }
        Ok(JointPrediction { mean, cov, size: m, dof: n })
    }

    /// Model on the design augmented by `(x, y)`, using an `O(N^2)` update
    /// of the Cholesky factor.
    pub fn extend(&self, x: &[f64], y: f64) -> Result<GpModel> {
        let mut m = self.clone();
        m.push_point(x, y)?;
        Ok(m)
    }

    /// In-place extension. Leaves `self` unchanged on error.
    pub(crate) fn push_point(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.design.dim(), x.len())?;
        if !y.is_finite() {
            return Err(Error::input("response is not finite"));
        }
        let k = self.cross(x);
        self.chol.push_row(&k, 1.0 + self.hyper.nugget())?;
        let n = self.chol.dim();
        let last = self.chol.row(n - 1);
        let zn = (y - dot(&last[..n - 1], &self.whitened)) / last[n - 1];
        self.whitened.push(zn);
        self.design.push_row(x);
        self.responses.push(y);
        self.refresh_solves();
        Ok(())
    }
}
