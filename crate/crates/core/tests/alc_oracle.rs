//! Refit, finite-difference and exhaustive-scan oracles for pointwise and
//! joint variance-reduction search.

use lagp_core::benchmarks::{gen_paths_2d, test_function_2d, PathSpec, Rect};
use lagp_core::design::sq_dist;
use lagp_core::local::{alc_reduction, greedy_alc_design};
use lagp_core::optim::BoxBounds;
use lagp_core::path::{
    greedy_joint_design, init_stack, joint_alc_gradient, joint_alc_reduction, optimize_candidate, sample_paths,
    snap_to_candidate, JointAlc,
};
use lagp_core::{
    rng, DesignMatrix, DesignMethod, GpModel, Hyperparams, PathMethod, PathSearchConfig, PredictionSet, SearchConfig,
};
use rand::Rng;

fn random_design<R: Rng>(r: &mut R, n: usize, p: usize) -> DesignMatrix {
    DesignMatrix::from_flat((0..n * p).map(|_| r.random::<f64>()).collect(), p).unwrap()
}

fn random_model<R: Rng>(r: &mut R, n: usize, p: usize) -> GpModel {
    let design = random_design(r, n, p);
    let y = (0..n).map(|_| r.random::<f64>()).collect();
    let ls = (0..p).map(|_| 0.1 + 0.4 * r.random::<f64>()).collect();
    GpModel::build(design, y, Hyperparams::new(ls, 1e-6).unwrap()).unwrap()
}

fn refit_reduction(model: &GpModel, w: &[f64], c: &[f64]) -> f64 {
    let before = model.unscaled_variance(w).unwrap();
    let after = model.extend(c, 0.0).unwrap().unscaled_variance(w).unwrap();
    before - after
}

#[test]
fn pointwise_reduction_equals_refit() {
    let mut r = rng::seeded(21);
    for _ in 0..60 {
        let p = r.random_range(1..4);
        let n = r.random_range(5..25);
        let model = random_model(&mut r, n, p);
        let x: Vec<f64> = (0..p).map(|_| r.random()).collect();
        let c: Vec<f64> = (0..p).map(|_| r.random()).collect();
        let a = alc_reduction(&model, &x, &c).unwrap();
        let b = refit_reduction(&model, &x, &c);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn joint_reduction_equals_mean_of_refits() {
    let mut r = rng::seeded(22);
    for _ in 0..20 {
        let p = 2;
        let model = random_model(&mut r, 15, p);
        let w = PredictionSet::new(random_design(&mut r, 30, p));
        let c: Vec<f64> = (0..p).map(|_| r.random()).collect();
        let j = joint_alc_reduction(&model, &w, &c).unwrap();
        let oracle: f64 = w.points().iter_rows().map(|wi| refit_reduction(&model, wi, &c)).sum::<f64>() / 30.0;
        assert!((j - oracle).abs() < 1e-8);
        assert!(j >= -1e-10);
    }
}

#[test]
fn singleton_set_matches_pointwise() {
    let mut r = rng::seeded(23);
    let model = random_model(&mut r, 12, 2);
    let x = [0.4, 0.6];
    let w = PredictionSet::from_rows(&[x]).unwrap();
    for _ in 0..10 {
        let c = [r.random::<f64>(), r.random::<f64>()];
        let a = joint_alc_reduction(&model, &w, &c).unwrap();
        let b = alc_reduction(&model, &x, &c).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    // without a nugget, the candidate at w itself removes all of v_j(w)
    let exact = GpModel::build(model.design().clone(), model.responses().to_vec(), model.hyper().with_nugget(0.0).unwrap())
        .unwrap();
    let v = exact.unscaled_variance(&x).unwrap();
    assert!((joint_alc_reduction(&exact, &w, &x).unwrap() - v).abs() < 1e-12);
}

#[test]
fn joint_gradient_matches_central_differences() {
    let mut r = rng::seeded(24);
    for _ in 0..30 {
        let p = if r.random_bool(0.5) { 2 } else { 4 };
        let (j, m) = (r.random_range(10..31), r.random_range(5..51));
        let model = random_model(&mut r, j, p);
        let w = PredictionSet::new(random_design(&mut r, m, p));
        let c: Vec<f64> = (0..p).map(|_| r.random()).collect();
        let g = joint_alc_gradient(&model, &w, &c).unwrap();
        let h = 1e-6;
        for l in 0..p {
            let mut a = c.clone();
            let mut b = c.clone();
            a[l] += h;
            b[l] -= h;
            let fd = (joint_alc_reduction(&model, &w, &a).unwrap() - joint_alc_reduction(&model, &w, &b).unwrap())
                / (2.0 * h);
            assert!((g[l] - fd).abs() <= 1e-5 * fd.abs() + 1e-8, "{} vs {}", g[l], fd);
        }
    }
}

#[test]
fn gradient_vanishes_across_mirror_axis() {
    // design and W symmetric under x -> -x; candidate on x = 0
    let design = DesignMatrix::from_rows(&[[-0.5, 0.0], [0.5, 0.0], [-0.3, 0.4], [0.3, 0.4], [0.0, -0.6]]).unwrap();
    let model = GpModel::build(design, vec![1.0, 1.0, 2.0, 2.0, 0.0], Hyperparams::new(vec![0.3, 0.3], 1e-6).unwrap())
        .unwrap();
    let w = PredictionSet::from_rows(&[[-0.2, 0.1], [0.2, 0.1], [0.0, 0.3]]).unwrap();
    let g = joint_alc_gradient(&model, &w, &[0.0, 0.2]).unwrap();
    assert!(g[0].abs() < 1e-8);
    assert!(g[1].abs() > 1e-8);
}

#[test]
fn extension_matches_rebuild() {
    let mut r = rng::seeded(25);
    for &n in &[5usize, 20, 60] {
        let p = 3;
        let full = random_model(&mut r, n, p);
        let head = GpModel::build(
            full.design().select(&(0..n - 1).collect::<Vec<_>>()),
            full.responses()[..n - 1].to_vec(),
            full.hyper().clone(),
        )
        .unwrap();
        let ext = head.extend(full.design().row(n - 1), full.responses()[n - 1]).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..p).map(|_| r.random()).collect();
            let a = ext.predict(&x).unwrap();
            let b = full.predict(&x).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-8 && (a.scale2 - b.scale2).abs() < 1e-8);
        }
        assert!((ext.log_likelihood() - full.log_likelihood()).abs() < 1e-8);
    }
}

#[test]
fn init_stack_matches_full_sort() {
    let mut r = rng::seeded(26);
    let design = random_design(&mut r, 500, 2);
    let w = PredictionSet::new(random_design(&mut r, 7, 2));
    let stack = init_stack(&design, &w).unwrap();
    let mut oracle: Vec<(f64, usize)> = (0..500)
        .map(|i| (w.points().iter_rows().map(|wi| sq_dist(design.row(i), wi)).fold(f64::INFINITY, f64::min), i))
        .collect();
    oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    assert_eq!(stack, oracle.iter().map(|v| v.1).collect::<Vec<_>>());

    let single = PredictionSet::from_rows(&[design.row(123)]).unwrap();
    assert_eq!(init_stack(&design, &single).unwrap()[0], 123);
}

#[test]
fn snapping_matches_full_scan() {
    let mut r = rng::seeded(27);
    let design = random_design(&mut r, 200, 3);
    let all: Vec<usize> = (0..200).collect();
    for _ in 0..20 {
        let used: Vec<bool> = (0..200).map(|_| r.random_bool(0.3)).collect();
        let x: Vec<f64> = (0..3).map(|_| r.random()).collect();
        let got = snap_to_candidate(&x, &design, &all, &used).unwrap();
        let best = (0..200)
            .filter(|&i| !used[i])
            .min_by(|&a, &b| sq_dist(design.row(a), &x).total_cmp(&sq_dist(design.row(b), &x)).then(a.cmp(&b)))
            .unwrap();
        assert_eq!(got, best);
    }
    // a used row snaps to its nearest unused neighbour
    let mut used = vec![false; 200];
    used[5] = true;
    let got = snap_to_candidate(design.row(5), &design, &all, &used).unwrap();
    assert_ne!(got, 5);
}

#[test]
fn continuous_search_reaches_grid_maximum_in_1d() {
    let design = DesignMatrix::from_rows(&[[0.0], [0.25], [0.5], [0.75], [1.0]]).unwrap();
    let model = GpModel::build(design, vec![0.0, 1.0, 0.0, -1.0, 0.0], Hyperparams::new(vec![0.05], 1e-6).unwrap())
        .unwrap();
    let w = PredictionSet::from_rows(&[[0.58], [0.62], [0.66]]).unwrap();
    let crit = JointAlc::new(&model, &w).unwrap();
    let bounds = BoxBounds::uniform(0.0, 1.0, 1);
    let grid_max = (0..=10_000)
        .filter_map(|i| crit.evaluate(&[i as f64 / 10_000.0], false).ok().map(|v| v.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let res = optimize_candidate(&crit, &[0.55], &bounds, 100, 0.0).unwrap();
    let at = crit.evaluate(&res.point, false).unwrap().0;
    assert!(at >= grid_max - 1e-6, "{at} vs {grid_max}");
    assert!(res.log_criterion >= res.start_log_criterion - 1e-9);
}

fn grid_training(k: usize) -> (DesignMatrix, Vec<f64>) {
    let mut rows = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            rows.push([-2.0 + 4.0 * i as f64 / (k - 1) as f64, -2.0 + 4.0 * j as f64 / (k - 1) as f64]);
        }
    }
    let y = rows.iter().map(|r| test_function_2d(r).unwrap()).collect();
    (DesignMatrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn singleton_exhaustive_matches_pointwise_design() {
    let (x, y) = grid_training(20);
    let hyper = Hyperparams::new(vec![0.5, 0.5], 1e-6).unwrap();
    let q = [0.13, -0.41];
    let w = PredictionSet::from_rows(&[q]).unwrap();
    let cfg = PathSearchConfig { n0: 6, n: 25, candidate_limit: Some(150), method: PathMethod::AlcEx, ..Default::default() };
    let joint = greedy_joint_design(&x, &y, &w, &cfg, &hyper).unwrap();
    let pcfg = SearchConfig {
        n0: 6,
        n: 25,
        candidate_limit: 150,
        method: DesignMethod::Alc,
        local_mle: false,
        ..Default::default()
    };
    let point = greedy_alc_design(&x, &y, &q, &pcfg, &hyper).unwrap();
    assert_eq!(joint.indices(), point.indices());

    let seed_only = PathSearchConfig { n0: 8, n: 8, method: PathMethod::AlcOpt, ..cfg };
    let d = greedy_joint_design(&x, &y, &w, &seed_only, &hyper).unwrap();
    assert_eq!(d.indices(), &init_stack(&x, &w).unwrap()[..8]);
}

fn mean_variance(model: &GpModel, w: &PredictionSet) -> f64 {
    w.points().iter_rows().map(|p| model.unscaled_variance(p).unwrap()).sum::<f64>() / w.len() as f64
}

#[test]
fn optimized_search_tracks_exhaustive_on_paths() {
    let (x, y) = grid_training(40);
    let hyper = Hyperparams::new(vec![0.1, 0.1], 1e-6).unwrap();
    let mut spec = PathSpec::new(Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 5);
    spec.resolution = 20;
    let paths = gen_paths_2d(&spec, 20).unwrap();
    let (mut ex, mut opt, mut nn) = (0.0, 0.0, 0.0);
    for path in &paths {
        let w = &path.points;
        let run = |method| {
            let cfg = PathSearchConfig { n0: 6, n: 40, method, ..Default::default() };
            let d = greedy_joint_design(&x, &y, w, &cfg, &hyper).unwrap();
            let mut seen = d.indices().to_vec();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), 40);
            mean_variance(d.model(), w)
        };
        ex += run(PathMethod::AlcEx);
        opt += run(PathMethod::AlcOpt);
        nn += run(PathMethod::NnJoint);
    }
    assert!(opt <= 1.1 * ex, "opt {opt} ex {ex}");
    assert!(ex < nn && opt < nn, "ex {ex} opt {opt} nn {nn}");
}

#[test]
fn exhaustive_variance_is_monotone_in_design_size() {
    let (x, y) = grid_training(25);
    let hyper = Hyperparams::new(vec![0.5, 0.5], 1e-6).unwrap();
    let mut spec = PathSpec::new(Rect::new(-2.0, 2.0, -2.0, 2.0).unwrap(), 6);
    spec.resolution = 15;
    for path in gen_paths_2d(&spec, 3).unwrap() {
        let mut last = f64::INFINITY;
        for n in [6, 10, 15, 20, 30] {
            let cfg = PathSearchConfig { n0: 6, n, method: PathMethod::AlcEx, ..Default::default() };
            let v = mean_variance(greedy_joint_design(&x, &y, &path.points, &cfg, &hyper).unwrap().model(), &path.points);
            assert!(v <= last + 1e-12);
            last = v;
        }
    }
}

#[test]
fn path_draws_follow_the_joint_law() {
    let mut r = rng::seeded(28);
    let model = random_model(&mut r, 20, 2);
    let w = PredictionSet::new(random_design(&mut r, 4, 2));
    let jp = model.predict_joint(w.points()).unwrap();
    let draws = sample_paths(&model, &w, 100_000, 3).unwrap();
    assert_eq!(draws, sample_paths(&model, &w, 100_000, 3).unwrap());
    let var = jp.variance_matrix();
    for i in 0..4 {
        let m: f64 = draws.iter().map(|d| d[i]).sum::<f64>() / 1e5;
        assert!((m - jp.mean[i]).abs() < 3.0 * (var[i * 4 + i] / 1e5).sqrt());
    }

    let one = PredictionSet::from_rows(&[[0.5, 0.5]]).unwrap();
    let target = model.predict(&[0.5, 0.5]).unwrap();
    let draws = sample_paths(&model, &one, 100_000, 4).unwrap();
    let mean: f64 = draws.iter().map(|d| d[0]).sum::<f64>() / 1e5;
    let v: f64 = draws.iter().map(|d| (d[0] - mean) * (d[0] - mean)).sum::<f64>() / (1e5 - 1.0);
    assert!((v / target.variance - 1.0).abs() < 0.05, "{v} vs {}", target.variance);
}
