//! Comparator grid, end-to-end fits, cross-validation and the species
//! ensemble.
//!
//! A method name is a base (`nn`, `nnsep`, `alc`, `alcsep`, `alc2`,
//! `alcsep2`) with an optional prescale suffix: `.s` for a single random
//! subsample, `.sb` for bootstrapped block Latin hypercube subsamples. The
//! `2` variants redo the ALC design under the local lengthscale estimate.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use lagp_core::blhs::{choose_blocks, prescale, Aggregator, GlobalScale, SubsampleMode, SubsampleSpec, DEFAULT_BOOTSTRAP, DEFAULT_TARGET_SIZE};
use lagp_core::local::LocalPrediction;
use lagp_core::metrics::{mixture_drag, rmse, rmspe, SpeciesMixture};
use lagp_core::mle::default_start;
use lagp_core::rng;
use lagp_core::{DesignMatrix, DesignMethod, Hyperparams, KernelMode, SearchConfig, DEFAULT_NUGGET};
use rand::seq::SliceRandom;

use crate::io::Dataset;
use crate::{parallel, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LocalMethod {
    Nn,
    Alc,
    /// ALC followed by a redesign under the local estimate.
    Alc2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prescale {
    None,
    Random,
    Blhs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub design: LocalMethod,
    pub kernel: KernelMode,
    pub prescale: Prescale,
    pub n0: usize,
    pub n: usize,
    pub candidate_limit: usize,
    /// Blocks per dimension; `None` picks the smallest `m` with an expected
    /// subsample of at most 1000 rows.
    pub blocks: Option<usize>,
    pub bootstrap_count: usize,
    pub aggregator: Aggregator,
    pub nugget: f64,
}

impl MethodSpec {
    pub fn new(design: LocalMethod, kernel: KernelMode, prescale: Prescale) -> Self {
        Self {
            design,
            kernel,
            prescale,
            n0: 6,
            n: 50,
            candidate_limit: 1000,
            blocks: None,
            bootstrap_count: DEFAULT_BOOTSTRAP,
            aggregator: Aggregator::Median,
            nugget: DEFAULT_NUGGET,
        }
    }

    /// All 18 canonical names.
    pub fn all_names() -> Vec<String> {
        let mut out = Vec::with_capacity(18);
        for base in ["nn", "nnsep", "alc", "alcsep", "alc2", "alcsep2"] {
            for suffix in ["", ".s", ".sb"] {
                out.push(format!("{base}{suffix}"));
            }
        }
        out
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            n0: self.n0,
            n: self.n,
            candidate_limit: self.candidate_limit,
            method: if self.design == LocalMethod::Nn { DesignMethod::Nn } else { DesignMethod::Alc },
            local_mle: true,
            second_stage: self.design == LocalMethod::Alc2,
            kernel_mode: self.kernel,
        }
    }

    fn subsample_spec(&self, rows: usize, dim: usize, seed: u64) -> SubsampleSpec {
        let m = self.blocks.unwrap_or_else(|| choose_blocks(rows, dim, DEFAULT_TARGET_SIZE));
        match self.prescale {
            Prescale::Random => SubsampleSpec { bootstrap_count: 1, mode: SubsampleMode::Random, ..SubsampleSpec::new(m, seed) },
            _ => SubsampleSpec {
                bootstrap_count: self.bootstrap_count,
                aggregator: self.aggregator,
                ..SubsampleSpec::new(m, seed)
            },
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.design {
            LocalMethod::Nn => "nn",
            LocalMethod::Alc | LocalMethod::Alc2 => "alc",
        };
        let sep = if self.kernel == KernelMode::Separable { "sep" } else { "" };
        let two = if self.design == LocalMethod::Alc2 { "2" } else { "" };
        let suffix = match self.prescale {
            Prescale::None => "",
            Prescale::Random => ".s",
            Prescale::Blhs => ".sb",
        };
        write!(f, "{base}{sep}{two}{suffix}")
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, prescale) = match s.split_once('.') {
            None => (s, Prescale::None),
            Some((b, "s")) => (b, Prescale::Random),
            Some((b, "sb")) => (b, Prescale::Blhs),
            Some(_) => return Err(Error::invalid(format!("unknown prescale suffix in method '{s}'"))),
        };
        let (design, kernel) = match base {
            "nn" => (LocalMethod::Nn, KernelMode::Isotropic),
            "nnsep" => (LocalMethod::Nn, KernelMode::Separable),
            "alc" => (LocalMethod::Alc, KernelMode::Isotropic),
            "alcsep" => (LocalMethod::Alc, KernelMode::Separable),
            "alc2" => (LocalMethod::Alc2, KernelMode::Isotropic),
            "alcsep2" => (LocalMethod::Alc2, KernelMode::Separable),
            _ => return Err(Error::invalid(format!("unknown method '{s}'"))),
        };
        Ok(MethodSpec::new(design, kernel, prescale))
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub scale: f64,
    pub predict: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// One entry per test row.
    pub predictions: Vec<lagp_core::Result<LocalPrediction>>,
    /// Global lengthscales used to prescale, if any.
    pub global: Option<GlobalScale>,
    /// Lengthscales the local searches started from (in the scaled space
    /// when prescaled).
    pub start: Hyperparams,
    pub times: StageTimes,
}

/// Accuracy over the successfully predicted rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub rmse: f64,
    pub rmspe: Option<f64>,
    pub failed: usize,
}

impl FitReport {
    pub fn failures(&self) -> usize {
        self.predictions.iter().filter(|p| p.is_err()).count()
    }

    /// Means, `NaN` at failed rows.
    pub fn means(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.as_ref().map_or(f64::NAN, |p| p.prediction.mean)).collect()
    }

    /// RMSE and, when no truth value is near zero, RMSPE.
    pub fn accuracy(&self, truth: &[f64]) -> Result<Accuracy> {
        if truth.len() != self.predictions.len() {
            return Err(Error::invalid("truth length differs from the number of predictions"));
        }
        let (mut pred, mut obs) = (Vec::new(), Vec::new());
        for (p, t) in self.predictions.iter().zip(truth) {
            if let Ok(p) = p {
                pred.push(p.prediction.mean);
                obs.push(*t);
            }
        }
        if pred.is_empty() {
            return Err(Error::invalid("every prediction failed"));
        }
        Ok(Accuracy { rmse: rmse(&pred, &obs)?, rmspe: rmspe(&pred, &obs).ok(), failed: truth.len() - pred.len() })
    }
}

/// Global lengthscales for a prescaled method, fitted on the training data.
pub fn global_scale(method: &MethodSpec, x: &DesignMatrix, y: &[f64], seed: u64) -> Result<Option<GlobalScale>> {
    if method.prescale == Prescale::None {
        return Ok(None);
    }
    let spec = method.subsample_spec(x.rows(), x.dim(), seed);
    parallel::bootstrap_lengthscales(x, y, &spec, method.nugget).map(Some)
}

/// Fit and predict with one method. Uses the current rayon pool.
///
/// `scale` overrides the global lengthscales a prescaled method would
/// otherwise estimate; with a scale, a `none` method is prescaled too.
pub fn fit_predict(
    method: &MethodSpec,
    train: &Dataset,
    test: &DesignMatrix,
    scale: Option<&[f64]>,
    seed: u64,
) -> Result<FitReport> {
    let y = train.responses("training")?;
    if test.dim() != train.dim() {
        return Err(lagp_core::Error::DimensionMismatch { expected: train.dim(), found: test.dim() }.into());
    }
    let t0 = Instant::now();
    let global = match scale {
        Some(s) => Some(GlobalScale { lengthscales: s.to_vec(), replicates: Vec::new() }),
        None => global_scale(method, &train.x, y, seed)?,
    };
    let scale_secs = t0.elapsed().as_secs_f64();

    let (x, xt, start) = match &global {
        Some(g) => (
            prescale(&train.x, &g.lengthscales)?,
            prescale(test, &g.lengthscales)?,
            Hyperparams::isotropic(1.0, train.dim(), method.nugget)?,
        ),
        None => (train.x.clone(), test.clone(), Hyperparams::isotropic(default_start(&train.x), train.dim(), method.nugget)?),
    };
    let cfg = method.search_config();
    let t1 = Instant::now();
    let predictions = parallel::predict_surface(&x, y, &xt, &cfg, &start);
    let predict_secs = t1.elapsed().as_secs_f64();
    log::info!("{method}: {} points, {} failed, {predict_secs:.2}s", test.rows(), predictions.iter().filter(|p| p.is_err()).count());
    Ok(FitReport { predictions, global, start, times: StageTimes { scale: scale_secs, predict: predict_secs } })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub test_rows: usize,
    pub accuracy: Accuracy,
}

/// Five-number summary (type-7 quantiles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self { min: quantile(&v, 0.0), q25: quantile(&v, 0.25), median: quantile(&v, 0.5), q75: quantile(&v, 0.75), max: quantile(&v, 1.0) }
    }
}

/// Type-7 quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub rmse: Quantiles,
    /// `None` when any fold had a truth value near zero.
    pub rmspe: Option<Quantiles>,
}

/// Seeded partition of `0..rows` into `folds` disjoint, exhaustive parts
/// whose sizes differ by at most one.
pub fn fold_partition(rows: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if folds > rows {
        return Err(Error::invalid(format!("{folds} folds for {rows} rows")));
    }
    let mut perm: Vec<usize> = (0..rows).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let mut parts = vec![Vec::new(); folds];
    for (k, i) in perm.into_iter().enumerate() {
        parts[k % folds].push(i);
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    Ok(parts)
}

/// K-fold cross-validation of one method. Fold `k` uses seed stream `k`.
pub fn cv_experiment(method: &MethodSpec, data: &Dataset, folds: usize, seed: u64) -> Result<CvReport> {
    let y = data.responses("cross-validation")?;
    let parts = fold_partition(data.rows(), folds, seed)?;
    let mut results = Vec::with_capacity(folds);
    for (k, test_idx) in parts.iter().enumerate() {
        let mut in_test = vec![false; data.rows()];
        for &i in test_idx {
            in_test[i] = true;
        }
        let train_idx: Vec<usize> = (0..data.rows()).filter(|&i| !in_test[i]).collect();
        let train = data.select(&train_idx);
        let test = data.x.select(test_idx);
        let truth: Vec<f64> = test_idx.iter().map(|&i| y[i]).collect();
        let report = fit_predict(method, &train, &test, None, rng::derive_seed(seed, k as u64))?;
        results.push(FoldResult { fold: k, test_rows: test_idx.len(), accuracy: report.accuracy(&truth)? });
    }
    let r: Vec<f64> = results.iter().map(|f| f.accuracy.rmse).collect();
    let p: Option<Vec<f64>> = results.iter().map(|f| f.accuracy.rmspe).collect();
    Ok(CvReport { rmse: Quantiles::of(&r), rmspe: p.map(|p| Quantiles::of(&p)), folds: results })
}

/// Anything mapping input rows to point predictions.
pub trait Predictor: Sync {
    fn predict(&self, inputs: &DesignMatrix) -> Result<Vec<f64>>;
}

impl<F> Predictor for F
where
    F: Fn(&DesignMatrix) -> Result<Vec<f64>> + Sync,
{
    fn predict(&self, inputs: &DesignMatrix) -> Result<Vec<f64>> {
        self(inputs)
    }
}

/// A local GP emulator of one species' training data.
#[derive(Debug, Clone)]
pub struct LocalGpPredictor {
    pub method: MethodSpec,
    pub train: Dataset,
    pub seed: u64,
}

impl Predictor for LocalGpPredictor {
    fn predict(&self, inputs: &DesignMatrix) -> Result<Vec<f64>> {
        let report = fit_predict(&self.method, &self.train, inputs, None, self.seed)?;
        report.predictions.into_iter().map(|p| p.map(|p| p.prediction.mean).map_err(Error::from)).collect()
    }
}

/// Combine six pure-species predictions at each input by the mass-weighted
/// mixture rule. Predictors are in the fixed species order.
pub fn ensemble_species(
    predictors: &[&dyn Predictor],
    inputs: &DesignMatrix,
    mixtures: &[SpeciesMixture],
) -> Result<Vec<f64>> {
    if predictors.len() != 6 {
        return Err(Error::invalid(format!("ensemble needs 6 species predictors, got {}", predictors.len())));
    }
    if mixtures.len() != inputs.rows() {
        return Err(Error::invalid(format!("{} mixture rows for {} inputs", mixtures.len(), inputs.rows())));
    }
    let per: Vec<Vec<f64>> = predictors.iter().map(|p| p.predict(inputs)).collect::<Result<_>>()?;
    if per.iter().any(|v| v.len() != inputs.rows()) {
        return Err(Error::invalid("a species predictor returned the wrong number of values"));
    }
    mixtures
        .iter()
        .enumerate()
        .map(|(i, mix)| {
            let cd: [f64; 6] = std::array::from_fn(|k| per[k][i]);
            mixture_drag(&cd, mix).map_err(Error::from)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let names = MethodSpec::all_names();
        assert_eq!(names.len(), 18);
        for name in &names {
            let m: MethodSpec = name.parse().unwrap();
            assert_eq!(&m.to_string(), name);
        }
        let m: MethodSpec = "alcsep2.sb".parse().unwrap();
        assert_eq!((m.design, m.kernel, m.prescale), (LocalMethod::Alc2, KernelMode::Separable, Prescale::Blhs));
        assert!(m.search_config().second_stage);
        for bad in ["nn2", "alc.x", "", "alcsep.sb.s", "ALC"] {
            assert!(bad.parse::<MethodSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn quantiles_of_small_sets() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((q.min, q.q25, q.median, q.q75, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(median(&[1.0, 2.0]), 1.5);
    }

    #[test]
    fn folds_are_disjoint_and_exhaustive() {
        let parts = fold_partition(23, 5, 9).unwrap();
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(parts.iter().all(|p| p.len() == 4 || p.len() == 5));
        assert_eq!(parts, fold_partition(23, 5, 9).unwrap());
        assert_ne!(parts, fold_partition(23, 5, 10).unwrap());
        assert!(fold_partition(3, 4, 0).is_err());
        assert!(fold_partition(3, 1, 0).is_err());
    }
}
