//! Pointwise local approximate GP.
//!
//! For a query `x` a small design `X_n(x)` is chosen from the global design:
//! either its `n` nearest neighbours, or `n0` nearest neighbours extended
//! greedily by the candidate (among the `candidate_limit` nearest) that most
//! reduces the predictive variance at `x`. A local GP on that subset, with
//! optionally re-estimated lengthscales, gives the prediction.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::design::{sq_dist, DesignMatrix};
use crate::error::{check_dim, Error, Result};
use crate::gp::{GpModel, Prediction};
use crate::kernel::{corr, Hyperparams, KernelMode};
use crate::linalg::dot;
use crate::mle::{mean_sq_distance, mle_lengthscales, LengthscaleBounds, MleOptions};
use crate::search::{AlcSearch, CANDIDATE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignMethod {
    Nn,
    Alc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Nearest-neighbour seed size.
    pub n0: usize,
    /// Final local design size.
    pub n: usize,
    /// Number of nearest candidates searched (capped at `N`).
    pub candidate_limit: usize,
    pub method: DesignMethod,
    /// Re-estimate lengthscales on the local design.
    pub local_mle: bool,
    /// After the local fit, redo the ALC design under the local estimate
    /// and refit once more.
    pub second_stage: bool,
    pub kernel_mode: KernelMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n0: 6,
            n: 50,
            candidate_limit: 1000,
            method: DesignMethod::Alc,
            local_mle: true,
            second_stage: false,
            kernel_mode: KernelMode::Isotropic,
        }
    }
}

impl SearchConfig {
    /// Check `1 <= n0 <= n <= candidate_limit`, capping the limit at `rows`.
    pub fn effective(&self, rows: usize) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.candidate_limit = cfg.candidate_limit.min(rows);
        if cfg.n0 == 0 {
            return Err(Error::input("n0 must be at least 1"));
        }
        if cfg.n0 > cfg.n {
            return Err(Error::input("n0 must not exceed n"));
        }
        if cfg.n > rows {
            return Err(Error::input("local design size exceeds the training size"));
        }
        if cfg.n > cfg.candidate_limit {
            cfg.candidate_limit = cfg.n;
        }
        Ok(cfg)
    }
}

/// Non-fatal events recorded while building a local design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warning {
    /// Every remaining candidate was rejected; the design stopped at `size`.
    AllCandidatesRejected { size: usize },
    /// The nugget was multiplied by ten this many times to factor the seed.
    NuggetRaised(u32),
    MleNotConverged,
    /// Local lengthscale estimation failed; the incoming lengthscales were kept.
    MleFailed,
    /// Joint criterion underflowed at a search start.
    CriterionUnderflow,
}

/// A local design for a reference set (a single query point for pointwise
/// designs) and the GP fitted on it.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDesign {
    reference: DesignMatrix,
    indices: Vec<usize>,
    model: GpModel,
    warnings: Vec<Warning>,
}

impl LocalDesign {
    pub(crate) fn new(reference: DesignMatrix, indices: Vec<usize>, model: GpModel, warnings: Vec<Warning>) -> Self {
        Self { reference, indices, model, warnings }
    }

    /// First reference location (the query point for pointwise designs).
    pub fn center(&self) -> &[f64] {
        self.reference.row(0)
    }

    pub fn reference(&self) -> &DesignMatrix {
        &self.reference
    }

    /// Global row indices in selection order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn hyper(&self) -> &Hyperparams {
        self.model.hyper()
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest `(key, index)` pairs in ascending order.
pub(crate) fn smallest_k(mut keyed: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let k = k.min(keyed.len());
    if k == 0 {
        return Vec::new();
    }
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, by_distance);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(by_distance);
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Indices of the `n` rows closest to `x` in Euclidean distance, nearest
/// first; ties go to the lower index.
pub fn nn_design(design: &DesignMatrix, x: &[f64], n: usize) -> Result<Vec<usize>> {
    check_dim(design.dim(), x.len())?;
    if n > design.rows() {
        return Err(Error::input("n exceeds the number of design rows"));
    }
    let keyed = design.iter_rows().enumerate().map(|(i, r)| (sq_dist(r, x), i)).collect();
    Ok(smallest_k(keyed, n))
}

/// Reduction in unscaled predictive variance at `x` from adding `candidate`
/// to the model's design: `v_j(x) - v_{j+1}(x)`.
pub fn alc_reduction(model: &GpModel, x: &[f64], candidate: &[f64]) -> Result<f64> {
    check_dim(model.design().dim(), x.len())?;
    check_dim(model.design().dim(), candidate.len())?;
    let ls = model.hyper().lengthscales();
    let chol = model.cholesky();
    let zc = chol.solve_lower(&model.cross(candidate));
    let v = 1.0 + model.hyper().nugget() - dot(&zc, &zc);
    if !(v > CANDIDATE_TOL) {
        return Err(Error::CandidateRejected(v));
    }
    let zx = chol.solve_lower(&model.cross(x));
    let c = corr(candidate, x, ls) - dot(&zc, &zx);
    Ok(c * c / v)
}

pub(crate) fn check_training(design: &DesignMatrix, responses: &[f64]) -> Result<()> {
    check_dim(design.rows(), responses.len())
}

fn seed_model(
    design: &DesignMatrix,
    responses: &[f64],
    seed: &[usize],
    hyper: &Hyperparams,
    warnings: &mut Vec<Warning>,
) -> Result<GpModel> {
    let y: Vec<f64> = seed.iter().map(|&i| responses[i]).collect();
    let (model, raises) = GpModel::build_with_escalation(design.select(seed), y, hyper.clone())?;
    if raises > 0 {
        warnings.push(Warning::NuggetRaised(raises));
    }
    Ok(model)
}

/// Greedy variance-reduction design for the rows of `refs`: seed with the
/// first `n0` candidates, then repeatedly add the available candidate with
/// the largest mean reduction over `refs`.
pub(crate) fn greedy_design_for_refs(
    design: &DesignMatrix,
    responses: &[f64],
    refs: &DesignMatrix,
    candidates: Vec<usize>,
    n0: usize,
    n: usize,
    hyper: &Hyperparams,
) -> Result<LocalDesign> {
    let mut warnings = Vec::new();
    let n0 = n0.min(candidates.len());
    let seed: Vec<usize> = candidates[..n0].to_vec();
    let mut model = seed_model(design, responses, &seed, hyper, &mut warnings)?;
    let mut indices = seed;
    let mut search = AlcSearch::new(design, candidates, refs, &model, n.max(n0));
    for slot in 0..n0 {
        search.mark_used(slot);
    }
    while indices.len() < n {
        let Some((slot, _)) = search.best() else {
            warnings.push(Warning::AllCandidatesRejected { size: indices.len() });
            break;
        };
        let row = search.candidates()[slot];
        search.mark_used(slot);
        match model.push_point(design.row(row), responses[row]) {
            Ok(()) => {
                indices.push(row);
                search.absorb(&model);
            }
            // the variance test already guards the pivot; skip the rare
            // candidate that still fails
            Err(Error::Breakdown(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(LocalDesign::new(refs.clone(), indices, model, warnings))
}

/// Build the local design for query `x`.
pub fn greedy_alc_design(
    design: &DesignMatrix,
    responses: &[f64],
    x: &[f64],
    cfg: &SearchConfig,
    hyper: &Hyperparams,
) -> Result<LocalDesign> {
    check_training(design, responses)?;
    check_dim(design.dim(), x.len())?;
    check_dim(design.dim(), hyper.dim())?;
    let cfg = cfg.effective(design.rows())?;
    let reference = DesignMatrix::from_flat(x.to_vec(), x.len())?;
    match cfg.method {
        DesignMethod::Nn => {
            let mut warnings = Vec::new();
            let indices = nn_design(design, x, cfg.n)?;
            let model = seed_model(design, responses, &indices, hyper, &mut warnings)?;
            Ok(LocalDesign::new(reference, indices, model, warnings))
        }
        DesignMethod::Alc => {
            let candidates = nn_design(design, x, cfg.candidate_limit)?;
            greedy_design_for_refs(design, responses, &reference, candidates, cfg.n0, cfg.n, hyper)
        }
    }
}

fn local_fit(model: &GpModel, init: &Hyperparams, mode: KernelMode) -> Result<crate::mle::MleFit> {
    let sub = model.design();
    let bounds = LengthscaleBounds::from_design(sub);
    mle_lengthscales(sub, model.responses(), init, &bounds, &MleOptions::with_mode(mode))
}

/// Re-estimate lengthscales on the local design and, for a second-stage ALC
/// configuration, rebuild the design under the new estimate and refit once
/// more.
///
/// Isotropic fits start from the mean pairwise squared distance of the local
/// subset; separable fits start from the lengthscales the design was built
/// with.
pub fn local_mle_and_redesign(
    design: &DesignMatrix,
    responses: &[f64],
    ld: &LocalDesign,
    cfg: &SearchConfig,
) -> Result<LocalDesign> {
    let mut warnings = ld.warnings.clone();
    let incoming = ld.hyper();
    let init = match cfg.kernel_mode {
        KernelMode::Isotropic => {
            Hyperparams::isotropic(mean_sq_distance(ld.model.design()), incoming.dim(), incoming.nugget())?
        }
        KernelMode::Separable => incoming.clone(),
    };
    let fit = match local_fit(&ld.model, &init, cfg.kernel_mode) {
        Ok(f) => f,
        Err(_) => {
            warnings.push(Warning::MleFailed);
            return Ok(LocalDesign { warnings, ..ld.clone() });
        }
    };
    if !fit.converged {
        warnings.push(Warning::MleNotConverged);
    }

    if cfg.second_stage && cfg.method == DesignMethod::Alc {
        let redesign = greedy_alc_design(design, responses, ld.center(), cfg, &fit.hyper)?;
        warnings.extend_from_slice(redesign.warnings());
        let hyper = match local_fit(&redesign.model, &fit.hyper, cfg.kernel_mode) {
            Ok(f2) => {
                if !f2.converged {
                    warnings.push(Warning::MleNotConverged);
                }
                f2.hyper
            }
            Err(_) => {
                warnings.push(Warning::MleFailed);
                fit.hyper
            }
        };
        let model = GpModel::build(redesign.model.design().clone(), redesign.model.responses().to_vec(), hyper)?;
        return Ok(LocalDesign::new(redesign.reference, redesign.indices, model, warnings));
    }

    let model = GpModel::build(ld.model.design().clone(), ld.model.responses().to_vec(), fit.hyper)?;
    Ok(LocalDesign::new(ld.reference.clone(), ld.indices.clone(), model, warnings))
}

/// Prediction at one query point with the design that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrediction {
    pub prediction: Prediction,
    pub indices: Vec<usize>,
    pub hyper: Hyperparams,
    pub warnings: Vec<Warning>,
}

/// Full local pipeline at one point: design, optional local MLE (and second
/// stage), then prediction.
pub fn predict_local(
    design: &DesignMatrix,
    responses: &[f64],
    x: &[f64],
    cfg: &SearchConfig,
    hyper: &Hyperparams,
) -> Result<LocalPrediction> {
    let mut ld = greedy_alc_design(design, responses, x, cfg, hyper)?;
    if cfg.local_mle {
        ld = local_mle_and_redesign(design, responses, &ld, cfg)?;
    }
    let prediction = ld.model.predict(x)?;
    Ok(LocalPrediction { prediction, indices: ld.indices, hyper: ld.model.hyper().clone(), warnings: ld.warnings })
}

/// Serial surface prediction; one result per test row, failures kept per
/// point.
pub fn predict_surface(
    design: &DesignMatrix,
    responses: &[f64],
    test: &DesignMatrix,
    cfg: &SearchConfig,
    hyper: &Hyperparams,
) -> Vec<Result<LocalPrediction>> {
    test.iter_rows().map(|x| predict_local(design, responses, x, cfg, hyper)).collect()
}

/// Unscaled variance at `x` of a local design's model, for comparing designs.
pub fn design_variance(ld: &LocalDesign, x: &[f64]) -> Result<f64> {
    ld.model.unscaled_variance(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> DesignMatrix {
        let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
        DesignMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn nn_examples() {
        let d = line(4);
        assert_eq!(nn_design(&d, &[2.0], 1).unwrap(), vec![2]);
        assert_eq!(nn_design(&d, &[1.6], 2).unwrap(), vec![2, 1]);
        // tie between 1 and 2 at 1.5 goes to the lower index
        assert_eq!(nn_design(&d, &[1.5], 1).unwrap(), vec![1]);
        assert!(nn_design(&d, &[1.5], 5).is_err());
    }

    #[test]
    fn alc_self_selection_and_irrelevant_candidate() {
        let d = DesignMatrix::from_rows(&[[0.0], [0.3], [0.9]]).unwrap();
        let m = GpModel::build(d, vec![1.0, 0.5, -0.2], Hyperparams::new(vec![0.2], 0.0).unwrap()).unwrap();
        let x = [0.55];
        let r = alc_reduction(&m, &x, &x).unwrap();
        assert!((r - m.unscaled_variance(&x).unwrap()).abs() < 1e-10);
        let far = alc_reduction(&m, &x, &[100.0]).unwrap();
        assert!(far.abs() < 1e-14);
        assert!(matches!(alc_reduction(&m, &x, &[0.3]), Err(Error::CandidateRejected(_))));
    }

    #[test]
    fn config_validation() {
        let cfg = SearchConfig { n0: 6, n: 10, candidate_limit: 1000, ..Default::default() };
        assert_eq!(cfg.effective(20).unwrap().candidate_limit, 20);
        assert!(cfg.effective(8).is_err());
        assert!(SearchConfig { n0: 0, ..cfg.clone() }.effective(20).is_err());
        assert!(SearchConfig { n0: 11, ..cfg }.effective(20).is_err());
    }

    #[test]
    fn nn_method_and_seed_only() {
        let rows: Vec<[f64; 2]> = (0..100).map(|i| [(i % 10) as f64 / 9.0, (i / 10) as f64 / 9.0]).collect();
        let d = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| libm::sin(3.0 * r[0]) + r[1]).collect();
        let h = Hyperparams::isotropic(0.1, 2, 1e-6).unwrap();
        let x = [0.33, 0.61];
        let cfg = SearchConfig { n0: 4, n: 12, method: DesignMethod::Nn, local_mle: false, ..Default::default() };
        let ld = greedy_alc_design(&d, &y, &x, &cfg, &h).unwrap();
        assert_eq!(ld.indices(), nn_design(&d, &x, 12).unwrap().as_slice());
        let cfg = SearchConfig { n0: 5, n: 5, method: DesignMethod::Alc, ..cfg };
        let ld = greedy_alc_design(&d, &y, &x, &cfg, &h).unwrap();
        assert_eq!(ld.indices(), nn_design(&d, &x, 5).unwrap().as_slice());
    }
}
