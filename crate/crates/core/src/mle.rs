//! Maximum likelihood estimation of lengthscales with the nugget held fixed.
//!
//! The search runs over `log(theta)` inside a box, maximizing the profiled
//! log marginal likelihood with its analytic gradient.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::DesignMatrix;
use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::kernel::{Hyperparams, KernelMode};
use crate::optim::{minimize_box, BoxBounds, QuasiNewtonOptions};
use crate::stats::{pairwise_sq_distances, quantile, quantile_sorted};

/// Rows used when summarizing pairwise distances of a large design.
const DISTANCE_SAMPLE_ROWS: usize = 1000;

/// Box for lengthscales, shared by every input dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthscaleBounds {
    pub lower: f64,
    pub upper: f64,
}

impl LengthscaleBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower && upper.is_finite()) {
            return Err(Error::InvalidHyperparams("lengthscale bounds must satisfy 0 < lower <= upper < inf"));
        }
        Ok(Self { lower, upper })
    }

    /// `[1e-3 * q05, 10 * max]` of the design's pairwise squared distances.
    pub fn from_design(design: &DesignMatrix) -> Self {
        let mut d = pairwise_sq_distances(design, DISTANCE_SAMPLE_ROWS);
        d.retain(|v| *v > 0.0);
        if d.is_empty() {
            return Self { lower: 1e-6, upper: 1.0 };
        }
        d.sort_by(f64::total_cmp);
        let q05 = quantile_sorted(&d, 0.05);
        let max = d[d.len() - 1];
        Self { lower: 1e-3 * q05, upper: 10.0 * max }
    }

    pub fn clamp(&self, theta: f64) -> f64 {
        theta.clamp(self.lower, self.upper)
    }

    fn log_box(&self, dim: usize) -> BoxBounds {
        BoxBounds::uniform(libm::log(self.lower), libm::log(self.upper), dim)
    }
}

/// Data-derived starting lengthscale: the 10% quantile of pairwise squared
/// distances.
pub fn default_start(design: &DesignMatrix) -> f64 {
    let mut d = pairwise_sq_distances(design, DISTANCE_SAMPLE_ROWS);
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    quantile(&d, 0.1)
}

/// Mean pairwise squared distance of a design (isotropic local start).
pub fn mean_sq_distance(design: &DesignMatrix) -> f64 {
    let d = pairwise_sq_distances(design, DISTANCE_SAMPLE_ROWS);
    if d.is_empty() {
        return 1.0;
    }
    let m = d.iter().sum::<f64>() / d.len() as f64;
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub mode: KernelMode,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { mode: KernelMode::Separable, max_iter: 200, grad_tol: 1e-6 }
    }
}

impl MleOptions {
    pub fn with_mode(mode: KernelMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub hyper: Hyperparams,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub iterations: usize,
    /// False when the optimizer stopped without meeting a convergence test;
    /// the best iterate is still returned.
    pub converged: bool,
}

/// Maximize the log marginal likelihood over the lengthscales.
///
/// Isotropic mode optimizes a single shared lengthscale started at the
/// geometric mean of `init`. The returned estimate is never worse than the
/// (clamped) start.
pub fn mle_lengthscales(
    design: &DesignMatrix,
    responses: &[f64],
    init: &Hyperparams,
    bounds: &LengthscaleBounds,
    opts: &MleOptions,
) -> Result<MleFit> {
    let p = design.dim();
    check_dim(p, init.dim())?;
    check_dim(design.rows(), responses.len())?;
    let nugget = init.nugget();
    let (start, nparams): (Vec<f64>, usize) = match opts.mode {
        KernelMode::Isotropic => (vec![libm::log(bounds.clamp(init.geometric_mean()))], 1),
        KernelMode::Separable => {
            (init.lengthscales().iter().map(|t| libm::log(bounds.clamp(*t))).collect(), p)
        }
    };
    let expand = |params: &[f64]| -> Vec<f64> {
        match opts.mode {
            KernelMode::Isotropic => vec![libm::exp(params[0]); p],
            KernelMode::Separable => params.iter().map(|v| libm::exp(*v)).collect(),
        }
    };
    let fit = |params: &[f64]| -> Result<GpModel> {
        let hyper = Hyperparams::new(expand(params), nugget)?;
        GpModel::build(design.clone(), responses.to_vec(), hyper)
    };

    let initial = fit(&start)?;
    let initial_ll = initial.log_likelihood();
    if !initial_ll.is_finite() {
        return Err(Error::input("log likelihood is not finite at the starting lengthscales"));
    }

    let objective = |params: &[f64]| -> Option<(f64, Vec<f64>)> {
        let model = fit(params).ok()?;
        let ll = model.log_likelihood();
        let grad = model.log_likelihood_gradient();
        let g = match opts.mode {
            KernelMode::Isotropic => vec![-grad.iter().sum::<f64>()],
            KernelMode::Separable => grad.iter().map(|v| -v).collect(),
        };
        Some((-ll, g))
    };
    let qn = QuasiNewtonOptions { max_iter: opts.max_iter, pgtol: opts.grad_tol, ..Default::default() };
    let result = minimize_box(objective, &start, &bounds.log_box(nparams), &qn);

    let hyper = Hyperparams::new(expand(&result.x), nugget)?;
    Ok(MleFit {
        hyper,
        log_likelihood: -result.f,
        initial_log_likelihood: initial_ll,
        iterations: result.iterations,
        converged: result.converged(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_follow_distance_quantiles() {
        let d = DesignMatrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let b = LengthscaleBounds::from_design(&d);
        // squared distances 1, 4, 9
        assert!((b.upper - 90.0).abs() < 1e-12);
        assert!((b.lower - 1e-3 * 1.3).abs() < 1e-12);
        assert!((default_start(&d) - 1.6).abs() < 1e-12);
        assert!((mean_sq_distance(&d) - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_never_decreases() {
        let xs: Vec<[f64; 1]> = (0..12).map(|i| [i as f64 / 11.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| libm::sin(6.0 * x[0])).collect();
        let d = DesignMatrix::from_rows(&xs).unwrap();
        let init = Hyperparams::new(vec![1.0], 1e-6).unwrap();
        let b = LengthscaleBounds::from_design(&d);
        let fit = mle_lengthscales(&d, &y, &init, &b, &MleOptions::default()).unwrap();
        assert!(fit.log_likelihood >= fit.initial_log_likelihood - 1e-9);
        let t = fit.hyper.lengthscales()[0];
        assert!(t >= b.lower && t <= b.upper);
    }
}
