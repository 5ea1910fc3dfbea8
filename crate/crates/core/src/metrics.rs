//! Error metrics and the species-mixture drag combiner.

use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky_with_jitter, dot};

/// Truth entries smaller than this in magnitude make RMSPE undefined.
pub const RMSPE_ZERO_TOL: f64 = 1e-12;

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    check_dim(truth.len(), pred.len())?;
    if truth.is_empty() {
        return Err(Error::input("metric needs at least one entry"));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(libm::sqrt(s / truth.len() as f64))
}

/// Root mean squared percentage error, in percent.
pub fn rmspe(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let mut s = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if t.abs() < RMSPE_ZERO_TOL {
            return Err(Error::input("RMSPE is undefined for a zero truth entry"));
        }
        let e = 100.0 * (p - t) / t;
        s += e * e;
    }
    Ok(libm::sqrt(s / truth.len() as f64))
}

/// `sqrt((y - mu)^T Sigma^{-1} (y - mu))` via a Cholesky solve. `cov` is a
/// row-major `m x m` matrix; a failing factorization is retried with
/// escalating diagonal jitter.
pub fn mahalanobis(truth: &[f64], mean: &[f64], cov: &[f64]) -> Result<f64> {
    check_pair(mean, truth)?;
    let m = truth.len();
    check_dim(m * m, cov.len())?;
    let chol = cholesky_with_jitter(cov, m)?;
    let r: Vec<f64> = truth.iter().zip(mean).map(|(t, mu)| t - mu).collect();
    let z = chol.solve_lower(&r);
    Ok(libm::sqrt(dot(&z, &z)))
}

/// `mean(-(mu - y)^2 / var - log var)`; larger is better.
pub fn proper_score(truth: &[f64], mean: &[f64], var: &[f64]) -> Result<f64> {
    check_pair(mean, truth)?;
    check_dim(truth.len(), var.len())?;
    let mut s = 0.0;
    for ((t, mu), v) in truth.iter().zip(mean).zip(var) {
        if !(*v > 0.0) {
            return Err(Error::input("proper score needs positive variances"));
        }
        s += -(mu - t) * (mu - t) / v - libm::log(*v);
    }
    Ok(s / truth.len() as f64)
}

/// Species order used throughout: O, O2, N, N2, He, H.
pub const SPECIES: [&str; 6] = ["O", "O2", "N", "N2", "He", "H"];

/// Particle masses in atomic mass units (standard atomic weights).
pub const PARTICLE_MASSES: [f64; 6] = [15.999, 31.998, 14.007, 28.014, 4.0026, 1.008];

/// Mole fractions and particle masses of the six atmospheric species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesMixture {
    mole_fractions: [f64; 6],
    masses: [f64; 6],
}

impl SpeciesMixture {
    pub fn new(mole_fractions: [f64; 6]) -> Result<Self> {
        Self::with_masses(mole_fractions, PARTICLE_MASSES)
    }

    pub fn with_masses(mole_fractions: [f64; 6], masses: [f64; 6]) -> Result<Self> {
        if !mole_fractions.iter().all(|c| *c >= 0.0 && c.is_finite()) {
            return Err(Error::input("mole fractions must be nonnegative and finite"));
        }
        if !masses.iter().all(|m| *m > 0.0 && m.is_finite()) {
            return Err(Error::input("particle masses must be positive and finite"));
        }
        if !(mole_fractions.iter().sum::<f64>() > 0.0) {
            return Err(Error::input("mole fractions must not all be zero"));
        }
        Ok(Self { mole_fractions, masses })
    }

    /// Unit mixture of species `k`.
    pub fn pure(k: usize) -> Result<Self> {
        if k >= 6 {
            return Err(Error::input("species index out of range"));
        }
        let mut chi = [0.0; 6];
        chi[k] = 1.0;
        Self::new(chi)
    }

    pub fn mole_fractions(&self) -> &[f64; 6] {
        &self.mole_fractions
    }

    pub fn masses(&self) -> &[f64; 6] {
        &self.masses
    }

    /// Normalized weights `chi_k m_k / sum chi_j m_j`.
    pub fn weights(&self) -> [f64; 6] {
        let mut w = [0.0; 6];
        for (wk, (c, m)) in w.iter_mut().zip(self.mole_fractions.iter().zip(&self.masses)) {
            *wk = c * m;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

/// Mass-weighted combination of per-species drag coefficients.
pub fn mixture_drag(per_species: &[f64; 6], mix: &SpeciesMixture) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((cd, c), m) in per_species.iter().zip(&mix.mole_fractions).zip(&mix.masses) {
        num += cd * c * m;
        den += c * m;
    }
    if !(den > 0.0) {
        return Err(Error::input("mixture weights are all zero"));
    }
    Ok(num / den)
}
