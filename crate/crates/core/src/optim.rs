//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! A projected L-BFGS: the two-loop recursion runs on the free variables
//! (those not pinned at a bound by the sign of their gradient), steps are
//! projected back into the box, and an Armijo backtracking search is done
//! along the projection path. Stopping follows the L-BFGS-B conventions: the
//! infinity norm of the projected gradient `P(x - g) - x` against `pgtol`, and
//! the relative reduction `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` against
//! `factr * eps`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::linalg::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        Self { lower, upper }
    }

    pub fn uniform(lower: f64, upper: f64, dim: usize) -> Self {
        Self { lower: alloc::vec![lower; dim], upper: alloc::vec![upper; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| *v >= *lo && *v <= *hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiNewtonOptions {
    pub max_iter: usize,
    /// Projected-gradient tolerance (infinity norm).
    pub pgtol: f64,
    /// Relative reduction tolerance, in units of machine epsilon.
    pub factr: f64,
    /// Number of stored correction pairs.
    pub memory: usize,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self { max_iter: 200, pgtol: 1e-6, factr: 1e7, memory: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient below `pgtol`.
    ProjectedGradient,
    /// Relative reduction below `factr * eps`.
    RelativeReduction,
    /// No acceptable step along the search direction.
    LineSearch,
    MaxIterations,
    /// The objective could not be evaluated at the start point.
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl OptimResult {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::ProjectedGradient | Termination::RelativeReduction)
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], b: &BoxBounds) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..x.len() {
        let pg = (x[i] - g[i]).clamp(b.lower[i], b.upper[i]) - x[i];
        m = m.max(pg.abs());
    }
    m
}

/// Minimize `f` over the box. The objective returns `None` where it cannot
/// be evaluated; such points are treated as infinitely bad. The returned
/// point is always the best one evaluated, so `f(result) <= f(start)`.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bounds: &BoxBounds, opts: &QuasiNewtonOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut evaluations = 1;
    let (mut fx, mut g) = match f(&x) {
        Some((v, g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => (v, g),
        _ => {
            return OptimResult {
                x,
                f: f64::INFINITY,
                iterations: 0,
                evaluations,
                termination: Termination::InfeasibleStart,
            }
        }
    };
    let eps = f64::EPSILON;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iterations = 0;

    let termination = loop {
        if projected_gradient_norm(&x, &g, bounds) <= opts.pgtol {
            break Termination::ProjectedGradient;
        }
        if iterations >= opts.max_iter {
            break Termination::MaxIterations;
        }

        // variables held at a bound
        let free: Vec<bool> = (0..n)
            .map(|i| {
                !((x[i] <= bounds.lower[i] && g[i] > 0.0) || (x[i] >= bounds.upper[i] && g[i] < 0.0))
            })
            .collect();
        let mut d = direction(&g, &free, &pairs);
        let mut gd = dot(&g, &d);
        if !(gd < 0.0) {
            pairs.clear();
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
            gd = dot(&g, &d);
            if !(gd < 0.0) {
                break Termination::ProjectedGradient;
            }
        }

        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut step = if pairs.is_empty() { (1.0 / dmax).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            bounds.project(&mut trial);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if moved.iter().all(|v| *v == 0.0) {
                break;
            }
            evaluations += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|c| c.is_finite())
                    && ft <= fx + 1e-4 * dot(&g, &moved)
                {
                    accepted = Some((trial, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((xn, fxn, gn, s)) = accepted else {
            if !pairs.is_empty() {
                // retry from steepest descent
                pairs.clear();
                iterations += 1;
                continue;
            }
            break Termination::LineSearch;
        };
        iterations += 1;

        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > eps * dot(&y, &y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let reduction = (fx - fxn) / fx.abs().max(fxn.abs()).max(1.0);
        x = xn;
        fx = fxn;
        g = gn;
        if reduction <= opts.factr * eps {
            break Termination::RelativeReduction;
        }
    };

    OptimResult { x, f: fx, iterations, evaluations, termination }
}

/// Two-loop recursion restricted to the free variables.
fn direction(g: &[f64], free: &[bool], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(a, &f)| if f { *a } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let s = mask(s);
        let y = mask(y);
        let a = rho * dot(&s, &q);
        for (qi, yi) in q.iter_mut().zip(&y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let s = mask(s);
        let y = mask(y);
        let yy = dot(&y, &y);
        let sy = dot(&s, &y);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let s = mask(s);
        let y = mask(y);
        let b = rho * dot(&y, &q);
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().zip(free).map(|(v, &f)| if f { -v } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rosenbrock(x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Some((f, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let b = BoxBounds::uniform(-5.0, 5.0, 2);
        let opts = QuasiNewtonOptions { max_iter: 500, pgtol: 1e-8, factr: 10.0, memory: 5 };
        let r = minimize_box(rosenbrock, &[-1.2, 1.0], &b, &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn active_bound() {
        // minimum of (x-3)^2 + (y+1)^2 on [0,2]x[0,2] is (2, 0)
        let f = |x: &[f64]| {
            Some(((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]))
        };
        let b = BoxBounds::uniform(0.0, 2.0, 2);
        let r = minimize_box(f, &[1.0, 1.0], &b, &QuasiNewtonOptions::default());
        assert_eq!(r.x, vec![2.0, 0.0]);
        assert!(r.converged());
    }

    #[test]
    fn stationary_start_is_returned() {
        let f = |x: &[f64]| Some((x[0] * x[0], vec![2.0 * x[0]]));
        let b = BoxBounds::uniform(-1.0, 1.0, 1);
        let r = minimize_box(f, &[0.0], &b, &QuasiNewtonOptions::default());
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // undefined for x > 0.5; minimum of (x-1)^2 restricted there is at the edge
        let f = |x: &[f64]| if x[0] > 0.5 { None } else { Some(((x[0] - 1.0).powi(2), vec![2.0 * (x[0] - 1.0)])) };
        let b = BoxBounds::uniform(-2.0, 2.0, 1);
        let r = minimize_box(f, &[-1.0], &b, &QuasiNewtonOptions::default());
        assert!(r.x[0] <= 0.5 && r.x[0] > 0.3);
        assert!(r.f <= 4.0);
    }
}
