use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lagp::bench::{self, BenchConfig, Experiment};
use lagp::io::{self, fmt_f64, write_table, Dataset};
use lagp::parallel;
use lagp::paths::{global_lengthscales, path_predict_many, PathComparator, PathConfig};
use lagp::pipeline::{ensemble_species, fit_predict, LocalGpPredictor, MethodSpec, Predictor};
use lagp::{Error, ErrorClass, Result};
use lagp_core::benchmarks::{gen_paths_2d, lhs_design, michalewicz, PathSpec, Rect};
use lagp_core::blhs::{choose_blocks, SubsampleMode, SubsampleSpec, DEFAULT_TARGET_SIZE};
use lagp_core::metrics::SPECIES;
use lagp_core::{rng, DesignMatrix, DEFAULT_NUGGET};

#[derive(Parser)]
#[command(name = "lagp", version, about = "Local approximate Gaussian process emulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestFn {
    Borehole,
    Michalewicz,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleMode {
    Blhs,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Latin hypercube design with test-function responses.
    GenDesign {
        #[arg(long = "fn", value_enum)]
        function: TestFn,
        #[arg(long)]
        n: usize,
        /// Input dimension (borehole is always 8).
        #[arg(long)]
        p: Option<usize>,
        /// Michalewicz steepness.
        #[arg(long = "M", default_value_t = 10.0)]
        m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random 2d paths in a rectangle.
    GenPaths {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// xmin,xmax,ymin,ymax
        #[arg(long, value_delimiter = ',', num_args = 4, allow_negative_numbers = true, default_value = "-2,2,-2,2")]
        rect: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrapped global lengthscales.
    GlobalScale {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum, default_value = "blhs")]
        mode: ScaleMode,
        /// Blocks per dimension (default: expected subsample of at most 1000 rows).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 30)]
        boot: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Local GP prediction at test rows.
    Predict {
        #[arg(long, default_value = "alc")]
        method: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 6)]
        n0: usize,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        nprime: usize,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Global lengthscales file from global-scale; prescales the inputs.
        #[arg(long)]
        scale: Option<PathBuf>,
    },
    /// Joint or pointwise prediction along paths.
    PathPredict {
        #[arg(long, default_value = "alc-opt")]
        method: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        paths: PathBuf,
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out_pred: PathBuf,
        #[arg(long)]
        out_cov: Option<PathBuf>,
        #[arg(long)]
        out_draws: Option<PathBuf>,
    },
    /// Desk-scale benchmark experiment.
    Bench {
        #[arg(long)]
        experiment: String,
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated surface methods (default: all 18) or path methods.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Mixture-weighted combination of six per-species emulators.
    Ensemble {
        /// Directory with one training file per species, named O.csv, O2.csv,
        /// N.csv, N2.csv, He.csv, H.csv.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        mix: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value = "alc")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error class=usage message={:?}", first.trim_start_matches("error: "));
            return ExitCode::from(ErrorClass::Usage.exit_code() as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            eprintln!("error class={} message={:?}", class.as_str(), e.to_string());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenDesign { function, n, p, m, seed, out } => gen_design(function, n, p, m, seed, &out),
        Command::GenPaths { count, resolution, rect, seed, out } => {
            let rect = Rect::new(rect[0], rect[1], rect[2], rect[3])?;
            let spec = PathSpec { resolution, ..PathSpec::new(rect, seed) };
            let paths: Vec<_> =
                gen_paths_2d(&spec, count)?.into_iter().enumerate().map(|(i, g)| (i as u64, g.points)).collect();
            io::write_paths(&out, &paths)
        }
        Command::GlobalScale { train, mode, m, boot, seed, threads, out } => {
            let data = io::read_dataset(&train)?;
            let y = data.responses("training")?;
            let m = m.unwrap_or_else(|| choose_blocks(data.rows(), data.dim(), DEFAULT_TARGET_SIZE));
            let spec = SubsampleSpec {
                bootstrap_count: boot,
                mode: match mode {
                    ScaleMode::Blhs => SubsampleMode::Blhs,
                    ScaleMode::Random => SubsampleMode::Random,
                },
                ..SubsampleSpec::new(m, seed)
            };
            let g = parallel::install(threads, || parallel::bootstrap_lengthscales(&data.x, y, &spec, DEFAULT_NUGGET))??;
            io::write_global_scale(&out, &g)
        }
        Command::Predict { method, train, test, n0, n, nprime, threads, seed, out, scale } => {
            let mut spec: MethodSpec = method.parse()?;
            spec.n0 = n0;
            spec.n = n;
            spec.candidate_limit = nprime;
            predict(&spec, &train, &test, threads, seed, &out, scale.as_deref())
        }
        Command::PathPredict { method, train, paths, n, draws, seed, threads, out_pred, out_cov, out_draws } => {
            let method: PathComparator = method.parse()?;
            predict_paths(method, &train, &paths, n, draws, seed, threads, &out_pred, out_cov.as_deref(), out_draws.as_deref())
        }
        Command::Bench { experiment, scale, reps, seed, methods, threads, outdir } => {
            let experiment: Experiment = experiment.parse()?;
            let mut cfg = BenchConfig::new(scale, reps, seed);
            if matches!(experiment, Experiment::Paths2d | Experiment::Paths4d) {
                cfg.path_methods = methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
            } else {
                cfg.methods = methods;
            }
            let out = parallel::install(threads, || bench::run(experiment, &cfg))??;
            out.write(&outdir)
        }
        Command::Ensemble { models, mix, inputs, method, seed, threads, out } => {
            let spec: MethodSpec = method.parse()?;
            let mixtures = io::read_mixtures(&mix)?;
            let x = io::read_dataset(&inputs)?.x;
            let predictors: Vec<LocalGpPredictor> = SPECIES
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let train = io::read_dataset(&models.join(format!("{s}.csv")))?;
                    Ok(LocalGpPredictor { method: spec.clone(), train, seed: rng::derive_seed(seed, k as u64) })
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p as &dyn Predictor).collect();
            let drag = parallel::install(threads, || ensemble_species(&refs, &x, &mixtures))??;
            write_table(&out, &["drag"], drag.iter().map(|v| vec![fmt_f64(*v)]))
        }
    }
}

fn gen_design(function: TestFn, n: usize, p: Option<usize>, m: f64, seed: u64, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("--n must be at least 1"));
    }
    let (x, y) = match function {
        TestFn::Borehole => {
            if p.is_some_and(|p| p != 8) {
                return Err(Error::invalid("borehole has 8 inputs"));
            }
            let x = lhs_design(n, 8, seed)?;
            let y = x.iter_rows().map(lagp_core::benchmarks::borehole).collect::<lagp_core::Result<Vec<_>>>()?;
            (x, y)
        }
        TestFn::Michalewicz => {
            let p = p.unwrap_or(4);
            if p == 0 {
                return Err(Error::invalid("--p must be at least 1"));
            }
            let u = lhs_design(n, p, seed)?;
            let x = DesignMatrix::from_flat(u.as_flat().iter().map(|v| std::f64::consts::PI * v).collect(), p)?;
            let y = x.iter_rows().map(|r| michalewicz(r, m)).collect::<lagp_core::Result<Vec<_>>>()?;
            (x, y)
        }
    };
    io::write_dataset(out, &Dataset::new(x, Some(y))?)
}

fn predict(spec: &MethodSpec, train: &Path, test: &Path, threads: usize, seed: u64, out: &Path, scale: Option<&Path>) -> Result<()> {
    let train = io::read_dataset(train)?;
    let test = io::read_dataset(test)?;
    let scale = scale.map(io::read_global_scale).transpose()?;
    let report = parallel::install(threads, || fit_predict(spec, &train, &test.x, scale.as_deref(), seed))??;
    let rows = report.predictions.iter().map(|p| match p {
        Ok(p) => vec![fmt_f64(p.prediction.mean), fmt_f64(p.prediction.scale2), p.prediction.dof.to_string(), String::new()],
        Err(e) => vec!["NaN".into(), "NaN".into(), "0".into(), e.to_string()],
    });
    write_table(out, &["mean", "scale2", "dof", "error"], rows)?;
    if let Some(truth) = &test.y {
        let acc = report.accuracy(truth)?;
        let metrics = out.with_extension("metrics.csv");
        let mut rows = vec![
            vec!["rmse".to_string(), fmt_f64(acc.rmse)],
            vec!["failed".to_string(), acc.failed.to_string()],
            vec!["seconds_scale".to_string(), fmt_f64(report.times.scale)],
            vec!["seconds_predict".to_string(), fmt_f64(report.times.predict)],
        ];
        if let Some(r) = acc.rmspe {
            rows.insert(1, vec!["rmspe".to_string(), fmt_f64(r)]);
        }
        write_table(&metrics, &["metric", "value"], rows)?;
        println!("rmse={} failed={}", fmt_f64(acc.rmse), acc.failed);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn predict_paths(
    method: PathComparator,
    train: &Path,
    paths: &Path,
    n: usize,
    draws: usize,
    seed: u64,
    threads: usize,
    out_pred: &Path,
    out_cov: Option<&Path>,
    out_draws: Option<&Path>,
) -> Result<()> {
    let train = io::read_dataset(train)?;
    let y = train.responses("training")?;
    let paths = io::read_paths(paths)?;
    let sets: Vec<_> = paths.iter().map(|(_, s)| s.clone()).collect();
    let cfg = PathConfig { n, ..PathConfig::default() };
    let preds = parallel::install(threads, || -> Result<Vec<_>> {
        let hyper = global_lengthscales(&train.x, y, DEFAULT_NUGGET, rng::derive_seed(seed, 0))?;
        path_predict_many(&train.x, y, &sets, method, &cfg, &hyper).into_iter().collect::<Result<Vec<_>>>()
    })??;

    let mut pred_rows = Vec::new();
    let mut cov_rows = Vec::new();
    let mut draw_rows = Vec::new();
    for ((id, _), p) in paths.iter().zip(&preds) {
        let var = p.variance_matrix();
        let m = p.law.size;
        for i in 0..m {
            pred_rows.push(vec![id.to_string(), i.to_string(), fmt_f64(p.law.mean[i]), fmt_f64(var[i * m + i]), p.law.dof.to_string()]);
            for j in 0..m {
                cov_rows.push(vec![id.to_string(), i.to_string(), j.to_string(), fmt_f64(var[i * m + j])]);
            }
        }
        if draws > 0 {
            for (d, row) in p.sample(draws, rng::derive_seed(seed, 1 + *id))?.iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    draw_rows.push(vec![id.to_string(), d.to_string(), i.to_string(), fmt_f64(*v)]);
                }
            }
        }
    }
    write_table(out_pred, &["path", "point", "mean", "variance", "dof"], pred_rows)?;
    if let Some(f) = out_cov {
        write_table(f, &["path", "i", "j", "covariance"], cov_rows)?;
    }
    if let Some(f) = out_draws {
        if draws == 0 {
            return Err(Error::invalid("--out-draws needs --draws > 0"));
        }
        write_table(f, &["path", "draw", "point", "value"], draw_rows)?;
    }
    Ok(())
}
