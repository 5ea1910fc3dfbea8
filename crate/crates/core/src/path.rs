//! Joint local designs for a set of predictive locations `W` (a path).
//!
//! The joint criterion is the mean over `w in W` of the pointwise variance
//! reduction from adding a candidate `x'` to the local design:
//!
//! ```text
//! J(x') = 1/|W| sum_w (K(x', w) - k_j(x')^T K_j^{-1} k_j(w))^2 / v_j(x')
//! ```
//!
//! `alc-ex` maximizes it over every candidate at each step, `alc-opt` treats
//! `x'` as continuous, climbs `log J` with its analytic gradient from a
//! deterministic stack of starts and snaps the result to the nearest unused
//! candidate, and `nn-joint` takes the candidates closest to any `w`.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::design::{sq_dist, DesignMatrix};
use crate::error::{check_dim, Error, Result};
use crate::gp::{GpModel, JointPrediction};
use crate::kernel::{corr, corr_dx, Hyperparams};
use crate::linalg::{cholesky_with_jitter, dot};
use crate::local::{check_training, greedy_design_for_refs, smallest_k, LocalDesign, Warning};
use crate::optim::{minimize_box, BoxBounds, QuasiNewtonOptions};
use crate::rng;
use crate::search::CANDIDATE_TOL;

/// Criterion values below this are treated as underflow at a search start.
pub const CRITERION_FLOOR: f64 = 1e-300;

/// Ordered, nonempty set of predictive locations.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet(DesignMatrix);

impl PredictionSet {
    pub fn new(points: DesignMatrix) -> Self {
        Self(points)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        DesignMatrix::from_rows(rows).map(Self)
    }

    pub fn points(&self) -> &DesignMatrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathMethod {
    AlcEx,
    AlcOpt,
    NnJoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSearchConfig {
    pub n0: usize,
    pub n: usize,
    /// Candidates searched, nearest to `W` first. `None` uses
    /// [`default_path_candidate_limit`].
    pub candidate_limit: Option<usize>,
    pub method: PathMethod,
    /// Iteration cap for each continuous candidate search.
    pub max_iter: usize,
    /// Projected-gradient tolerance for each continuous candidate search.
    pub pgtol: f64,
}

impl Default for PathSearchConfig {
    fn default() -> Self {
        Self { n0: 6, n: 50, candidate_limit: None, method: PathMethod::AlcOpt, max_iter: 100, pgtol: 0.1 }
    }
}

/// `min(N, 10 n sqrt(|W|), 10^4)`.
pub fn default_path_candidate_limit(rows: usize, n: usize, path_len: usize) -> usize {
    let v = libm::ceil(10.0 * n as f64 * libm::sqrt(path_len as f64)) as usize;
    v.min(10_000).min(rows)
}

fn min_sq_dist_to_set(x: &[f64], set: &DesignMatrix) -> f64 {
    set.iter_rows().map(|w| sq_dist(x, w)).fold(f64::INFINITY, f64::min)
}

/// Every design row ordered by its minimum distance to `W` (ties by index).
pub fn init_stack(design: &DesignMatrix, path: &PredictionSet) -> Result<Vec<usize>> {
    nearest_to_set(design, path, design.rows())
}

/// The `k` rows closest to any element of `W`.
pub fn nearest_to_set(design: &DesignMatrix, path: &PredictionSet, k: usize) -> Result<Vec<usize>> {
    check_dim(design.dim(), path.dim())?;
    let keyed = design.iter_rows().enumerate().map(|(i, r)| (min_sq_dist_to_set(r, path.points()), i)).collect();
    Ok(smallest_k(keyed, k))
}

/// The joint criterion and its gradient for one local model. Per-model
/// solves `L^{-1} k_j(w)` are done once at construction.
pub struct JointAlc<'m> {
    model: &'m GpModel,
    path: &'m DesignMatrix,
    z_path: Vec<Vec<f64>>,
}

impl<'m> JointAlc<'m> {
    pub fn new(model: &'m GpModel, path: &'m PredictionSet) -> Result<Self> {
        check_dim(model.design().dim(), path.dim())?;
        let chol = model.cholesky();
        let z_path = path.points().iter_rows().map(|w| chol.solve_lower(&model.cross(w))).collect();
        Ok(Self { model, path: path.points(), z_path })
    }

    /// Unscaled predictive variance `v_j(x)`.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let z = self.model.cholesky().solve_lower(&self.model.cross(x));
        1.0 + self.model.hyper().nugget() - dot(&z, &z)
    }

    /// Criterion value, with the gradient in `x` when `gradient` is set.
    pub fn evaluate(&self, x: &[f64], gradient: bool) -> Result<(f64, Option<Vec<f64>>)> {
        check_dim(self.model.design().dim(), x.len())?;
        let ls = self.model.hyper().lengthscales();
        let chol = self.model.cholesky();
        let k = self.model.cross(x);
        let zc = chol.solve_lower(&k);
        let v = 1.0 + self.model.hyper().nugget() - dot(&zc, &zc);
        if !(v > CANDIDATE_TOL) {
            return Err(Error::CandidateRejected(v));
        }
        let m = self.z_path.len() as f64;
        let kw: Vec<f64> = self.path.iter_rows().map(|w| corr(x, w, ls)).collect();
        // c_w = (K(x, w) - k(x)^T K^{-1} k(w)) / v
        let c: Vec<f64> = kw.iter().zip(&self.z_path).map(|(kxw, zw)| (kxw - dot(&zc, zw)) / v).collect();
        let value = c.iter().map(|cw| cw * cw).sum::<f64>() * v / m;
        if !gradient {
            return Ok((value, None));
        }
        let design = self.model.design();
        let p = x.len();
        let mut grad = vec![0.0; p];
        for (l, gl) in grad.iter_mut().enumerate() {
            let kdot: Vec<f64> = design.iter_rows().zip(&k).map(|(xi, ki)| corr_dx(x, xi, ls, l, *ki)).collect();
            let zd = chol.solve_lower(&kdot);
            // derivative of v_j(x) is -a
            let a = 2.0 * dot(&zd, &zc);
            let mut s = 0.0;
            for ((w, (kxw, zw)), cw) in self.path.iter_rows().zip(kw.iter().zip(&self.z_path)).zip(&c) {
                let kd = corr_dx(x, w, ls, l, *kxw);
                s += 2.0 * cw * (kd - dot(&zd, zw)) + cw * cw * a;
            }
            *gl = s / m;
        }
        Ok((value, Some(grad)))
    }
}

/// Mean over `W` of the variance reduction from adding `candidate`.
pub fn joint_alc_reduction(model: &GpModel, path: &PredictionSet, candidate: &[f64]) -> Result<f64> {
    JointAlc::new(model, path)?.evaluate(candidate, false).map(|(v, _)| v)
}

/// Gradient of [`joint_alc_reduction`] with respect to the candidate.
pub fn joint_alc_gradient(model: &GpModel, path: &PredictionSet, candidate: &[f64]) -> Result<Vec<f64>> {
    let (_, g) = JointAlc::new(model, path)?.evaluate(candidate, true)?;
    Ok(g.unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSearch {
    pub point: Vec<f64>,
    pub log_criterion: f64,
    pub start_log_criterion: f64,
    pub iterations: usize,
    /// The criterion at the start was below [`CRITERION_FLOOR`] (or the
    /// start was rejected); the start is returned unchanged.
    pub underflow: bool,
    pub converged: bool,
}

/// Maximize `log J(x)` over the box from `start`.
pub fn optimize_candidate(
    criterion: &JointAlc<'_>,
    start: &[f64],
    bounds: &BoxBounds,
    max_iter: usize,
    pgtol: f64,
) -> Result<CandidateSearch> {
    check_dim(bounds.dim(), start.len())?;
    let mut x0 = start.to_vec();
    bounds.project(&mut x0);
    let start_value = match criterion.evaluate(&x0, false) {
        Ok((v, _)) => v,
        Err(Error::CandidateRejected(_)) => 0.0,
        Err(e) => return Err(e),
    };
    if !(start_value >= CRITERION_FLOOR) {
        return Ok(CandidateSearch {
            point: x0,
            log_criterion: f64::NEG_INFINITY,
            start_log_criterion: f64::NEG_INFINITY,
            iterations: 0,
            underflow: true,
            converged: false,
        });
    }
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (v, g) = criterion.evaluate(x, true).ok()?;
        if !(v >= CRITERION_FLOOR) {
            return None;
        }
        let g = g?;
        Some((-libm::log(v), g.iter().map(|gi| -gi / v).collect()))
    };
    let opts = QuasiNewtonOptions { max_iter, pgtol, ..Default::default() };
    let r = minimize_box(objective, &x0, bounds, &opts);
    Ok(CandidateSearch {
        converged: r.converged(),
        point: r.x,
        log_criterion: -r.f,
        start_log_criterion: libm::log(start_value),
        iterations: r.iterations,
        underflow: false,
    })
}

/// Nearest unused candidate to `x` (ties by lowest index). `used` is indexed
/// by global row.
pub fn snap_to_candidate(x: &[f64], design: &DesignMatrix, candidates: &[usize], used: &[bool]) -> Result<usize> {
    check_dim(design.dim(), x.len())?;
    let mut best: Option<(f64, usize)> = None;
    for &i in candidates {
        if used[i] {
            continue;
        }
        let d = sq_dist(design.row(i), x);
        best = match best {
            Some((bd, bi)) if bd < d || (bd == d && bi < i) => Some((bd, bi)),
            _ => Some((d, i)),
        };
    }
    best.map(|(_, i)| i).ok_or(Error::NoCandidates)
}

/// Build a local design for the whole set `W`.
pub fn greedy_joint_design(
    design: &DesignMatrix,
    responses: &[f64],
    path: &PredictionSet,
    cfg: &PathSearchConfig,
    hyper: &Hyperparams,
) -> Result<LocalDesign> {
    check_training(design, responses)?;
    check_dim(design.dim(), path.dim())?;
    check_dim(design.dim(), hyper.dim())?;
    let rows = design.rows();
    if cfg.n0 == 0 || cfg.n0 > cfg.n || cfg.n > rows {
        return Err(Error::input("path search needs 1 <= n0 <= n <= N"));
    }
    let limit = cfg
        .candidate_limit
        .unwrap_or_else(|| default_path_candidate_limit(rows, cfg.n, path.len()))
        .clamp(cfg.n, rows);
    let candidates = nearest_to_set(design, path, limit)?;
    let reference = path.points().clone();

    match cfg.method {
        PathMethod::NnJoint => {
            let indices = candidates[..cfg.n].to_vec();
            let y = indices.iter().map(|&i| responses[i]).collect();
            let (model, raises) = GpModel::build_with_escalation(design.select(&indices), y, hyper.clone())?;
            let warnings = if raises > 0 { vec![Warning::NuggetRaised(raises)] } else { Vec::new() };
            Ok(LocalDesign::new(reference, indices, model, warnings))
        }
        PathMethod::AlcEx => greedy_design_for_refs(design, responses, &reference, candidates, cfg.n0, cfg.n, hyper),
        PathMethod::AlcOpt => alc_opt_design(design, responses, path, &candidates, cfg, hyper),
    }
}

fn alc_opt_design(
    design: &DesignMatrix,
    responses: &[f64],
    path: &PredictionSet,
    candidates: &[usize],
    cfg: &PathSearchConfig,
    hyper: &Hyperparams,
) -> Result<LocalDesign> {
    let mut warnings = Vec::new();
    let seed = candidates[..cfg.n0].to_vec();
    let y = seed.iter().map(|&i| responses[i]).collect();
    let (mut model, raises) = GpModel::build_with_escalation(design.select(&seed), y, hyper.clone())?;
    if raises > 0 {
        warnings.push(Warning::NuggetRaised(raises));
    }
    let mut used = vec![false; design.rows()];
    for &i in &seed {
        used[i] = true;
    }
    let mut indices = seed;
    let ranges = design.column_ranges();
    let bounds = BoxBounds::new(ranges.iter().map(|r| r.0).collect(), ranges.iter().map(|r| r.1).collect());
    // the stack is the candidate list; entries already in the design are
    // skipped, which also pops any stack element matched by a snap
    let mut stack = candidates.iter().copied();

    while indices.len() < cfg.n {
        let Some(start) = stack.by_ref().find(|&i| !used[i]) else {
            warnings.push(Warning::AllCandidatesRejected { size: indices.len() });
            break;
        };
        let criterion = JointAlc::new(&model, path)?;
        let search = optimize_candidate(&criterion, design.row(start), &bounds, cfg.max_iter, cfg.pgtol)?;
        if search.underflow {
            warnings.push(Warning::CriterionUnderflow);
        }
        let mut chosen = snap_to_candidate(&search.point, design, candidates, &used)?;
        if !(criterion.variance(design.row(chosen)) > CANDIDATE_TOL) {
            chosen = start;
        }
        drop(criterion);
        match model.push_point(design.row(chosen), responses[chosen]) {
            Ok(()) => {
                used[chosen] = true;
                indices.push(chosen);
            }
            Err(Error::Breakdown(_)) => {
                // indistinguishable from the design; never consider it again
                used[chosen] = true;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(LocalDesign::new(path.points().clone(), indices, model, warnings))
}

/// Draws from the joint multivariate Student-t predictive law over `W`,
/// `n_draws x |W|`.
pub fn sample_paths(model: &GpModel, path: &PredictionSet, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    sample_student_t(&model.predict_joint(path.points())?, n_draws, seed)
}

/// Draws from a multivariate Student-t law: each is
/// `mean + sqrt(dof / chi2_dof) L z` with `L L^T` the scale matrix.
pub fn sample_student_t(jp: &JointPrediction, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = jp.size;
    let chol = cholesky_with_jitter(&jp.cov, m)?;
    let dof = jp.dof as f64;
    let chi = ChiSquared::new(dof).map_err(|_| Error::input("degrees of freedom must be positive"))?;
    let mut rng = rng::seeded(seed);
    let mut draws = Vec::with_capacity(n_draws);
    let mut z = vec![0.0; m];
    for _ in 0..n_draws {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let scale = libm::sqrt(dof / chi.sample(&mut rng));
        let lz = chol.mul_lower(&z);
        draws.push(jp.mean.iter().zip(&lz).map(|(mu, e)| mu + scale * e).collect());
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_limit_default() {
        assert_eq!(default_path_candidate_limit(1_000_000, 60, 100), 6000);
        assert_eq!(default_path_candidate_limit(500, 60, 100), 500);
        assert_eq!(default_path_candidate_limit(1_000_000, 100, 100), 10_000);
    }

    #[test]
    fn stack_orders_by_min_distance() {
        let d = DesignMatrix::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]]).unwrap();
        let w = PredictionSet::from_rows(&[[0.9], [3.8]]).unwrap();
        // min distances: 0.9, 0.1, 1.1, 0.8, 0.2
        assert_eq!(init_stack(&d, &w).unwrap(), vec![1, 4, 3, 0, 2]);
        let w = PredictionSet::from_rows(&[[2.0]]).unwrap();
        assert_eq!(init_stack(&d, &w).unwrap()[0], 2);
    }

    #[test]
    fn snapping() {
        let d = DesignMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let all = [0, 1, 2];
        assert_eq!(snap_to_candidate(&[1.0], &d, &all, &[false; 3]).unwrap(), 1);
        assert_eq!(snap_to_candidate(&[1.0], &d, &all, &[false, true, false]).unwrap(), 0);
        assert!(matches!(snap_to_candidate(&[1.0], &d, &all, &[true; 3]), Err(Error::NoCandidates)));
    }
}
