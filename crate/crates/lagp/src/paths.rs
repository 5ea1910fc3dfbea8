//! Joint prediction along paths and the pointwise baselines.
//!
//! Joint comparators build one local design for the whole path and report
//! its full predictive covariance. The pointwise baselines build a separate
//! local design per path point and report a diagonal covariance.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use lagp_core::blhs::random_subsample;
use lagp_core::local::{local_mle_and_redesign, predict_local};
use lagp_core::metrics::mahalanobis;
use lagp_core::mle::{default_start, mle_lengthscales, LengthscaleBounds, MleOptions};
use lagp_core::path::{greedy_joint_design, sample_student_t};
use lagp_core::{
    DesignMatrix, DesignMethod, Hyperparams, JointPrediction, KernelMode, PathMethod, PathSearchConfig, PredictionSet, SearchConfig,
};
use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathComparator {
    AlcEx,
    AlcOpt,
    NnJoint,
    AlcPw,
    NnPw,
}

impl PathComparator {
    pub const ALL: [PathComparator; 5] =
        [PathComparator::AlcEx, PathComparator::AlcOpt, PathComparator::NnJoint, PathComparator::AlcPw, PathComparator::NnPw];

    pub fn name(self) -> &'static str {
        match self {
            PathComparator::AlcEx => "alc-ex",
            PathComparator::AlcOpt => "alc-opt",
            PathComparator::NnJoint => "nn-joint",
            PathComparator::AlcPw => "alc-pw",
            PathComparator::NnPw => "nn-pw",
        }
    }

    pub fn is_joint(self) -> bool {
        matches!(self, PathComparator::AlcEx | PathComparator::AlcOpt | PathComparator::NnJoint)
    }
}

impl fmt::Display for PathComparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PathComparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| Error::invalid(format!("unknown path method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub n0: usize,
    pub n: usize,
    /// Candidate pool for joint searches; `None` sizes it from `n` and `|W|`.
    pub joint_candidate_limit: Option<usize>,
    /// Candidate pool for each pointwise search.
    pub pointwise_candidate_limit: usize,
    /// Kernel refitted on every final local design (joint or pointwise)
    /// before prediction; `None` predicts with the global lengthscales.
    pub local_mle: Option<KernelMode>,
    pub max_iter: usize,
    pub pgtol: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        let joint = PathSearchConfig::default();
        Self {
            n0: joint.n0,
            n: 60,
            joint_candidate_limit: None,
            pointwise_candidate_limit: SearchConfig::default().candidate_limit,
            local_mle: Some(KernelMode::Isotropic),
            max_iter: joint.max_iter,
            pgtol: joint.pgtol,
        }
    }
}

/// Predictive law along one path plus the designs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPrediction {
    /// Multivariate Student-t location, scale matrix and degrees of freedom.
    pub law: JointPrediction,
    /// Global row indices: one design for joint methods, one per point for
    /// pointwise ones.
    pub designs: Vec<Vec<usize>>,
    pub seconds: f64,
}

impl PathPrediction {
    pub fn variance_matrix(&self) -> Vec<f64> {
        self.law.variance_matrix()
    }

    pub fn sample(&self, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        Ok(sample_student_t(&self.law, draws, seed)?)
    }

    /// Log Mahalanobis distance of `truth` under the predictive variance.
    pub fn log_mahalanobis(&self, truth: &[f64]) -> Result<f64> {
        Ok(mahalanobis(truth, &self.law.mean, &self.variance_matrix())?.ln())
    }
}

/// Predict along one path. Designs are searched under `hyper`.
pub fn path_predict(
    x: &DesignMatrix,
    y: &[f64],
    path: &PredictionSet,
    method: PathComparator,
    cfg: &PathConfig,
    hyper: &Hyperparams,
) -> Result<PathPrediction> {
    let t0 = Instant::now();
    let (law, designs) = if method.is_joint() {
        let jcfg = PathSearchConfig {
            n0: cfg.n0,
            n: cfg.n,
            candidate_limit: cfg.joint_candidate_limit,
            method: match method {
                PathComparator::AlcEx => PathMethod::AlcEx,
                PathComparator::AlcOpt => PathMethod::AlcOpt,
                _ => PathMethod::NnJoint,
            },
            max_iter: cfg.max_iter,
            pgtol: cfg.pgtol,
        };
        let mut ld = greedy_joint_design(x, y, path, &jcfg, hyper)?;
        if let Some(mode) = cfg.local_mle {
            let refit = SearchConfig { kernel_mode: mode, second_stage: false, ..SearchConfig::default() };
            ld = local_mle_and_redesign(x, y, &ld, &refit)?;
        }
        (ld.model().predict_joint(path.points())?, vec![ld.indices().to_vec()])
    } else {
        let scfg = SearchConfig {
            n0: cfg.n0,
            n: cfg.n,
            candidate_limit: cfg.pointwise_candidate_limit,
            method: if method == PathComparator::AlcPw { DesignMethod::Alc } else { DesignMethod::Nn },
            local_mle: cfg.local_mle.is_some(),
            kernel_mode: cfg.local_mle.unwrap_or(KernelMode::Isotropic),
            ..SearchConfig::default()
        };
        let m = path.len();
        let mut mean = Vec::with_capacity(m);
        let mut cov = vec![0.0; m * m];
        let mut dof = usize::MAX;
        let mut designs = Vec::with_capacity(m);
        for (i, w) in path.points().iter_rows().enumerate() {
            let lp = predict_local(x, y, w, &scfg, hyper)?;
            let p = lp.prediction;
            mean.push(p.mean);
            cov[i * m + i] = p.scale2;
            dof = dof.min(p.dof);
            designs.push(lp.indices);
        }
        (JointPrediction { mean, cov, size: m, dof }, designs)
    };
    Ok(PathPrediction { law, designs, seconds: t0.elapsed().as_secs_f64() })
}

/// [`path_predict`] over many paths concurrently, results in path order.
pub fn path_predict_many(
    x: &DesignMatrix,
    y: &[f64],
    paths: &[PredictionSet],
    method: PathComparator,
    cfg: &PathConfig,
    hyper: &Hyperparams,
) -> Vec<Result<PathPrediction>> {
    paths.par_iter().map(|p| path_predict(x, y, p, method, cfg, hyper)).collect()
}

/// Rows used by [`global_lengthscales`].
pub const GLOBAL_FIT_ROWS: usize = 400;

/// Separable lengthscales fitted on a seeded random subset of at most
/// [`GLOBAL_FIT_ROWS`] training rows.
pub fn global_lengthscales(x: &DesignMatrix, y: &[f64], nugget: f64, seed: u64) -> Result<Hyperparams> {
    let idx = random_subsample(x.rows(), GLOBAL_FIT_ROWS.min(x.rows()), seed)?;
    let sx = x.select(&idx);
    let sy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let bounds = LengthscaleBounds::from_design(x);
    let init = Hyperparams::isotropic(bounds.clamp(default_start(&sx)), x.dim(), nugget)?;
    Ok(mle_lengthscales(&sx, &sy, &init, &bounds, &MleOptions::default())?.hyper)
}
