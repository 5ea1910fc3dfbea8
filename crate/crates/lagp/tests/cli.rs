//! Runs the `lagp` binary on small files.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn lagp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lagp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = lagp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn column(file: &Path, name: &str) -> Vec<String> {
    let text = std::fs::read_to_string(file).unwrap();
    let mut lines = text.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn one_dimensional_michalewicz_design() {
    let dir = tempdir().unwrap();
    let f = dir.path().join("m.csv");
    ok(&["gen-design", "--fn", "michalewicz", "--n", "20", "--p", "1", "--seed", "3", "--out", p(&f)]);
    let text = std::fs::read_to_string(&f).unwrap();
    assert!(text.starts_with("x1,y\n"));
    assert_eq!(text.lines().count(), 21);
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((0.0..=std::f64::consts::PI).contains(&v[0]));
        let want = -(v[0].sin()) * (v[0] * v[0] / std::f64::consts::PI).sin().powi(20);
        assert!((v[1] - want).abs() < 1e-12);
    }
}

#[test]
fn predicting_training_rows_recovers_them() {
    let dir = tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let out = dir.path().join("pred.csv");
    ok(&["gen-design", "--fn", "borehole", "--n", "200", "--seed", "1", "--out", p(&train)]);
    let stdout = ok(&["predict", "--method", "nn", "--train", p(&train), "--test", p(&train), "--n", "20", "--out", p(&out)]);
    let rmse: f64 = stdout.trim().strip_prefix("rmse=").unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(rmse < 1e-2, "{rmse}");
    assert_eq!(column(&out, "mean").len(), 200);
    assert!(dir.path().join("pred.metrics.csv").exists());
}

#[test]
fn prescaled_prediction_from_a_scale_file() {
    let dir = tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    let scale = dir.path().join("scale.csv");
    let out = dir.path().join("pred.csv");
    ok(&["gen-design", "--fn", "michalewicz", "--n", "300", "--p", "2", "--M", "2", "--seed", "1", "--out", p(&train)]);
    ok(&["gen-design", "--fn", "michalewicz", "--n", "20", "--p", "2", "--M", "2", "--seed", "2", "--out", p(&test)]);
    ok(&["global-scale", "--train", p(&train), "--m", "3", "--boot", "3", "--out", p(&scale)]);
    ok(&["predict", "--method", "alc", "--train", p(&train), "--test", p(&test), "--n", "20", "--scale", p(&scale), "--out", p(&out)]);
    assert!(column(&out, "error").iter().all(String::is_empty));
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let usage = lagp(&["predict", "--method", "bogus", "--train", "a", "--test", "b", "--out", p(&out)]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("class=usage"));
    assert_eq!(lagp(&["no-such-command"]).status.code(), Some(2));

    let missing = dir.path().join("missing.csv");
    let data = lagp(&["predict", "--train", p(&missing), "--test", p(&missing), "--out", p(&out)]);
    assert_eq!(data.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&data.stderr).contains("class=data"));
}

#[test]
fn path_prediction_writes_covariance_and_draws() {
    let dir = tempdir().unwrap();
    let train = dir.path().join("train.csv");
    let paths = dir.path().join("paths.csv");
    let (pred, cov, draws) = (dir.path().join("pred.csv"), dir.path().join("cov.csv"), dir.path().join("draws.csv"));
    let mut rows = String::from("x1,x2,y\n");
    for i in 0..30 {
        for j in 0..30 {
            let (a, b) = (-2.0 + 4.0 * i as f64 / 29.0, -2.0 + 4.0 * j as f64 / 29.0);
            rows.push_str(&format!("{a},{b},{}\n", (a * b).sin()));
        }
    }
    std::fs::write(&train, rows).unwrap();
    ok(&["gen-paths", "--count", "2", "--resolution", "10", "--seed", "4", "--out", p(&paths)]);
    ok(&[
        "path-predict", "--method", "alc-opt", "--train", p(&train), "--paths", p(&paths), "--n", "20", "--draws", "5",
        "--out-pred", p(&pred), "--out-cov", p(&cov), "--out-draws", p(&draws),
    ]);
    assert_eq!(column(&pred, "mean").len(), 20);
    assert_eq!(column(&cov, "covariance").len(), 2 * 100);
    assert_eq!(column(&draws, "value").len(), 2 * 5 * 10);

    let pw = dir.path().join("pw.csv");
    let pw_cov = dir.path().join("pw_cov.csv");
    ok(&["path-predict", "--method", "nn-pw", "--train", p(&train), "--paths", p(&paths), "--n", "20", "--out-pred", p(&pw), "--out-cov", p(&pw_cov)]);
    let text = std::fs::read_to_string(&pw_cov).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[1] != f[2] {
            assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn bench_smoke_is_reproducible() {
    let dir = tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        ok(&[
            "bench", "--experiment", "borehole-grid", "--scale", "0.02", "--reps", "1", "--methods", "nn,alc.sb",
            "--threads", threads, "--outdir", p(out),
        ]);
    }
    let ra = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(ra, std::fs::read_to_string(b.join("results.csv")).unwrap());
    assert!(ra.starts_with("comparator,rep,metric,value\n"));
    assert!(a.join("summary.csv").exists() && a.join("timings.csv").exists());
}

#[test]
fn ensemble_reads_six_species_files() {
    let dir = tempdir().unwrap();
    let models = dir.path().join("models");
    std::fs::create_dir(&models).unwrap();
    for (k, s) in ["O", "O2", "N", "N2", "He", "H"].iter().enumerate() {
        let mut rows = String::from("x1,y\n");
        for i in 0..80 {
            rows.push_str(&format!("{},{}\n", i as f64 / 79.0, 2.0 + k as f64));
        }
        std::fs::write(models.join(format!("{s}.csv")), rows).unwrap();
    }
    let mix = dir.path().join("mix.csv");
    let inputs = dir.path().join("in.csv");
    let out = dir.path().join("drag.csv");
    std::fs::write(&mix, "O,O2,N,N2,He,H\n0,0,0,0,1,0\n1,0,0,0,0,0\n").unwrap();
    std::fs::write(&inputs, "x1\n0.31\n0.77\n").unwrap();
    ok(&["ensemble", "--models", p(&models), "--mix", p(&mix), "--inputs", p(&inputs), "--method", "nn", "--out", p(&out)]);
    let drag: Vec<f64> = column(&out, "drag").iter().map(|s| s.parse().unwrap()).collect();
    assert!((drag[0] - 6.0).abs() < 1e-3 && (drag[1] - 2.0).abs() < 1e-3, "{drag:?}");
}
