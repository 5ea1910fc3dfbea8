//! Desk-scale benchmark experiments emitting tidy result tables.
//!
//! Surface experiments (`borehole-grid`, `michalewicz-grid`) compare local
//! GP methods by out-of-sample accuracy on Latin hypercube designs. Path
//! experiments (`paths-2d`, `paths-4d`) compare joint and pointwise path
//! predictors by log Mahalanobis distance. Values in `results.csv` are
//! deterministic given the seed; wall times go to `timings.csv`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use lagp_core::benchmarks::{borehole, gen_paths_2d, lhs_design, michalewicz, test_function_2d, PathSpec, Rect, MICHALEWICZ_M};
use lagp_core::blhs::{Aggregator, GlobalScale, SubsampleMode, SubsampleSpec};
use lagp_core::metrics::rmse;
use lagp_core::{rng, DesignMatrix, PredictionSet, DEFAULT_NUGGET};
use rand::Rng;

use crate::io::{fmt_f64, write_table, Dataset};
use crate::parallel;
use crate::paths::{global_lengthscales, path_predict_many, PathComparator, PathConfig};
use crate::pipeline::{fit_predict, global_scale, quantile, MethodSpec, Prescale};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    BoreholeGrid,
    MichalewiczGrid,
    Paths2d,
    Paths4d,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::BoreholeGrid, Experiment::MichalewiczGrid, Experiment::Paths2d, Experiment::Paths4d];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::BoreholeGrid => "borehole-grid",
            Experiment::MichalewiczGrid => "michalewicz-grid",
            Experiment::Paths2d => "paths-2d",
            Experiment::Paths4d => "paths-4d",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::invalid(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Multiplies the full-scale sizes (10^4 training rows, 10^3 test rows).
    pub scale: f64,
    /// Replicate data sets (surface experiments) or paths (path experiments).
    pub reps: usize,
    pub seed: u64,
    /// Surface methods by canonical name; empty runs all 18.
    pub methods: Vec<String>,
    /// Path comparators; empty runs all five.
    pub path_methods: Vec<PathComparator>,
    /// Local design size for path experiments.
    pub path_n: usize,
}

impl BenchConfig {
    pub fn new(scale: f64, reps: usize, seed: u64) -> Self {
        Self { scale, reps, seed, methods: Vec::new(), path_methods: Vec::new(), path_n: PathConfig::default().n }
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid("scale must be positive"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        Ok(())
    }

    pub fn train_rows(&self) -> usize {
        ((1e4 * self.scale).round() as usize).max(200)
    }

    pub fn test_rows(&self) -> usize {
        ((1e3 * self.scale).round() as usize).max(20)
    }
}

/// One value in the tidy results table.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub comparator: String,
    pub rep: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub comparator: String,
    pub rep: usize,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOutput {
    pub records: Vec<Record>,
    pub timings: Vec<Timing>,
}

impl BenchOutput {
    fn record(&mut self, comparator: &str, rep: usize, metric: &str, value: f64) {
        self.records.push(Record { comparator: comparator.into(), rep, metric: metric.into(), value });
    }

    fn time(&mut self, comparator: &str, rep: usize, stage: &str, seconds: f64) {
        self.timings.push(Timing { comparator: comparator.into(), rep, stage: stage.into(), seconds });
    }

    /// Values of one comparator and metric in replicate order.
    pub fn values(&self, comparator: &str, metric: &str) -> Vec<f64> {
        self.records.iter().filter(|r| r.comparator == comparator && r.metric == metric).map(|r| r.value).collect()
    }

    /// Total seconds of one comparator over all replicates and stages.
    pub fn total_seconds(&self, comparator: &str) -> f64 {
        self.timings.iter().filter(|t| t.comparator == comparator).map(|t| t.seconds).sum()
    }

    /// Long-format summary: median, mean and 10%/90% quantiles per
    /// comparator and metric, in first-appearance order.
    pub fn summary(&self) -> Vec<(String, String, &'static str, f64)> {
        let mut keys: Vec<(&str, &str)> = Vec::new();
        for r in &self.records {
            if !keys.contains(&(r.comparator.as_str(), r.metric.as_str())) {
                keys.push((&r.comparator, &r.metric));
            }
        }
        let mut out = Vec::new();
        for (c, m) in keys {
            let mut v: Vec<f64> = self.values(c, m).into_iter().filter(|x| !x.is_nan()).collect();
            v.sort_by(f64::total_cmp);
            let mean = if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            for (stat, val) in [("median", quantile(&v, 0.5)), ("mean", mean), ("q10", quantile(&v, 0.1)), ("q90", quantile(&v, 0.9))] {
                out.push((c.to_string(), m.to_string(), stat, val));
            }
        }
        out
    }

    /// Write `results.csv`, `summary.csv` and `timings.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        write_table(
            &dir.join("results.csv"),
            &["comparator", "rep", "metric", "value"],
            self.records.iter().map(|r| vec![r.comparator.clone(), r.rep.to_string(), r.metric.clone(), fmt_f64(r.value)]),
        )?;
        write_table(
            &dir.join("summary.csv"),
            &["comparator", "metric", "statistic", "value"],
            self.summary().into_iter().map(|(c, m, s, v)| vec![c, m, s.to_string(), fmt_f64(v)]),
        )?;
        write_table(
            &dir.join("timings.csv"),
            &["comparator", "rep", "stage", "seconds"],
            self.timings.iter().map(|t| vec![t.comparator.clone(), t.rep.to_string(), t.stage.clone(), fmt_f64(t.seconds)]),
        )
    }
}

/// Run an experiment in the current rayon pool.
pub fn run(experiment: Experiment, cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    match experiment {
        Experiment::BoreholeGrid => surface_experiment(cfg, 8, |u| borehole(u).map_err(Error::from)),
        Experiment::MichalewiczGrid => surface_experiment(cfg, 4, |u| {
            let x: Vec<f64> = u.iter().map(|v| PI * v).collect();
            michalewicz(&x, MICHALEWICZ_M).map_err(Error::from)
        }),
        Experiment::Paths2d => path_experiment(cfg, paths_2d_problem(cfg)?),
        Experiment::Paths4d => path_experiment(cfg, paths_4d_problem(cfg)?),
    }
}

/// Training and test sets split from one Latin hypercube on `[0,1]^p`.
pub fn surface_data(
    train_rows: usize,
    test_rows: usize,
    p: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> Result<f64>,
) -> Result<(Dataset, Dataset)> {
    let all = lhs_design(train_rows + test_rows, p, seed)?;
    let y: Vec<f64> = all.iter_rows().map(&f).collect::<Result<_>>()?;
    let data = Dataset::new(all, Some(y))?;
    let train: Vec<usize> = (0..train_rows).collect();
    let test: Vec<usize> = (train_rows..train_rows + test_rows).collect();
    Ok((data.select(&train), data.select(&test)))
}

fn surface_experiment(cfg: &BenchConfig, p: usize, f: impl Fn(&[f64]) -> Result<f64>) -> Result<BenchOutput> {
    let methods: Vec<MethodSpec> = if cfg.methods.is_empty() {
        MethodSpec::all_names().iter().map(|n| n.parse()).collect::<Result<_>>()?
    } else {
        cfg.methods.iter().map(|n| n.parse()).collect::<Result<_>>()?
    };
    let mut out = BenchOutput::default();
    for rep in 0..cfg.reps {
        let data_seed = rng::derive_seed(cfg.seed, rep as u64);
        let (train, test) = surface_data(cfg.train_rows(), cfg.test_rows(), p, data_seed, &f)?;
        let y = train.responses("training")?;
        let truth = test.responses("test")?;
        // one global fit per prescale mode and replicate, shared by methods
        let scale_seed = rng::derive_seed(data_seed, 1);
        let mut scales: Vec<(Prescale, GlobalScale)> = Vec::new();
        for m in &methods {
            if m.prescale == Prescale::None || scales.iter().any(|(p, _)| *p == m.prescale) {
                continue;
            }
            let t = std::time::Instant::now();
            let g = global_scale(m, &train.x, y, scale_seed)?.expect("prescaled method");
            let name = if m.prescale == Prescale::Blhs { "global.sb" } else { "global.s" };
            out.time(name, rep, "scale", t.elapsed().as_secs_f64());
            for (k, t) in g.lengthscales.iter().enumerate() {
                out.record(name, rep, &format!("theta{}", k + 1), *t);
            }
            scales.push((m.prescale, g));
        }
        for m in &methods {
            let name = m.to_string();
            let scale = scales.iter().find(|(p, _)| *p == m.prescale).map(|(_, g)| g.lengthscales.as_slice());
            let report = fit_predict(m, &train, &test.x, scale, scale_seed)?;
            let acc = report.accuracy(truth)?;
            out.record(&name, rep, "rmse", acc.rmse);
            out.record(&name, rep, "rmspe", acc.rmspe.unwrap_or(f64::NAN));
            out.record(&name, rep, "failed", acc.failed as f64);
            out.time(&name, rep, "predict", report.times.predict);
        }
    }
    Ok(out)
}

/// Bootstrapped global lengthscales from block Latin hypercube subsamples
/// and from uniform subsamples of the matching expected size.
pub fn compare_subsampling(
    x: &DesignMatrix,
    y: &[f64],
    m: usize,
    bootstrap_count: usize,
    seed: u64,
) -> Result<(GlobalScale, GlobalScale)> {
    let spec = SubsampleSpec { bootstrap_count, aggregator: Aggregator::Median, ..SubsampleSpec::new(m, seed) };
    let blhs = parallel::bootstrap_lengthscales(x, y, &spec, DEFAULT_NUGGET)?;
    let random_spec = SubsampleSpec { mode: SubsampleMode::Random, seed: rng::derive_seed(seed, 1), ..spec };
    let random = parallel::bootstrap_lengthscales(x, y, &random_spec, DEFAULT_NUGGET)?;
    Ok((blhs, random))
}

/// Training data, paths and the response for a path experiment.
pub struct PathProblem {
    pub train: Dataset,
    pub paths: Vec<PredictionSet>,
    pub truth: Vec<Vec<f64>>,
}

/// `f(x1,x2) f(x3,x4)` with `f` the 2d test function.
pub fn product_test_function(x: &[f64]) -> lagp_core::Result<f64> {
    Ok(test_function_2d(&x[..2])? * test_function_2d(&x[2..4])?)
}

/// Square domain of the path experiments.
pub fn path_rect() -> Rect {
    Rect { xmin: -2.0, xmax: 2.0, ymin: -2.0, ymax: 2.0 }
}

fn truth_along(paths: &[PredictionSet], f: impl Fn(&[f64]) -> lagp_core::Result<f64>) -> Result<Vec<Vec<f64>>> {
    paths.iter().map(|p| p.points().iter_rows().map(&f).collect::<lagp_core::Result<_>>().map_err(Error::from)).collect()
}

/// Regular `k x k` grid on the path rectangle with `k^2` close to the scaled
/// training size; `reps` generated paths.
pub fn paths_2d_problem(cfg: &BenchConfig) -> Result<PathProblem> {
    let k = (cfg.train_rows() as f64).sqrt().round() as usize;
    let r = path_rect();
    let mut rows = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let t = |a: usize, lo: f64, hi: f64| lo + (hi - lo) * a as f64 / (k - 1) as f64;
            rows.push([t(i, r.xmin, r.xmax), t(j, r.ymin, r.ymax)]);
        }
    }
    let x = DesignMatrix::from_rows(&rows)?;
    let y: Vec<f64> = x.iter_rows().map(test_function_2d).collect::<lagp_core::Result<_>>()?;
    let spec = PathSpec::new(r, rng::derive_seed(cfg.seed, 1));
    let paths: Vec<PredictionSet> = gen_paths_2d(&spec, cfg.reps)?.into_iter().map(|g| g.points).collect();
    let truth = truth_along(&paths, test_function_2d)?;
    Ok(PathProblem { train: Dataset::new(x, Some(y))?, paths, truth })
}

/// Latin hypercube on `[-2,2]^4` with the product response. Each path is a
/// generated 2d path placed in a random pair of coordinates, the other two
/// held at uniform random values.
pub fn paths_4d_problem(cfg: &BenchConfig) -> Result<PathProblem> {
    let u = lhs_design(cfg.train_rows(), 4, rng::derive_seed(cfg.seed, 0))?;
    let x = DesignMatrix::from_flat(u.as_flat().iter().map(|v| 4.0 * v - 2.0).collect(), 4)?;
    let y: Vec<f64> = x.iter_rows().map(product_test_function).collect::<lagp_core::Result<_>>()?;
    let r = path_rect();
    let spec = PathSpec::new(r, rng::derive_seed(cfg.seed, 1));
    let base = gen_paths_2d(&spec, cfg.reps)?;
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut paths = Vec::with_capacity(base.len());
    for (i, g) in base.iter().enumerate() {
        let mut s = rng::stream(rng::derive_seed(cfg.seed, 2), i as u64);
        let (a, b) = PAIRS[s.random_range(0..PAIRS.len())];
        let fixed: [f64; 4] = std::array::from_fn(|_| s.random_range(-2.0..2.0));
        let mut flat = Vec::with_capacity(g.points.len() * 4);
        for row in g.points.points().iter_rows() {
            let mut p = fixed;
            p[a] = row[0];
            p[b] = row[1];
            flat.extend_from_slice(&p);
        }
        paths.push(PredictionSet::new(DesignMatrix::from_flat(flat, 4)?));
    }
    let truth = truth_along(&paths, product_test_function)?;
    Ok(PathProblem { train: Dataset::new(x, Some(y))?, paths, truth })
}

fn path_experiment(cfg: &BenchConfig, problem: PathProblem) -> Result<BenchOutput> {
    let y = problem.train.responses("training")?;
    let hyper = global_lengthscales(&problem.train.x, y, DEFAULT_NUGGET, rng::derive_seed(cfg.seed, 3))?;
    let pcfg = PathConfig { n: cfg.path_n, ..PathConfig::default() };
    let comparators: &[PathComparator] = if cfg.path_methods.is_empty() { &PathComparator::ALL } else { &cfg.path_methods };
    let mut out = BenchOutput::default();
    for (k, t) in hyper.lengthscales().iter().enumerate() {
        out.record("global", 0, &format!("theta{}", k + 1), *t);
    }
    for &c in comparators {
        let preds = path_predict_many(&problem.train.x, y, &problem.paths, c, &pcfg, &hyper);
        for (rep, (pred, truth)) in preds.into_iter().zip(&problem.truth).enumerate() {
            let pred = pred?;
            out.record(c.name(), rep, "log_mahalanobis", pred.log_mahalanobis(truth)?);
            out.record(c.name(), rep, "rmse", rmse(&pred.law.mean, truth)?);
            out.time(c.name(), rep, "design", pred.seconds);
        }
    }
    Ok(out)
}
