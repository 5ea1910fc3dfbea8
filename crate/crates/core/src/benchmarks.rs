//! Test functions, Latin hypercube designs and random 2d paths.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::design::DesignMatrix;
use crate::error::{check_dim, Error, Result};
use crate::path::PredictionSet;
use crate::rng;

fn in_unit_cube(x: &[f64]) -> bool {
    x.iter().all(|v| (0.0..=1.0).contains(v))
}

/// Borehole water flow on `[0,1]^8`, mapped affinely to the physical ranges
/// (inputs in order `rw, r, Tu, Hu, Tl, Hl, L, Kw`).
///
/// Note the radius of influence `r` spans `[100, 50000]`, the range of the
/// common reference implementation. Some presentations print `[100, 5000]`.
pub fn borehole(x: &[f64]) -> Result<f64> {
    check_dim(8, x.len())?;
    if !in_unit_cube(x) {
        return Err(Error::input("borehole inputs must lie in [0,1]^8"));
    }
    let rw = x[0] * (0.15 - 0.05) + 0.05;
    let r = x[1] * (50000.0 - 100.0) + 100.0;
    let tu = x[2] * (115600.0 - 63070.0) + 63070.0;
    let hu = x[3] * (1110.0 - 990.0) + 990.0;
    let tl = x[4] * (116.0 - 63.1) + 63.1;
    let hl = x[5] * (820.0 - 700.0) + 700.0;
    let l = x[6] * (1680.0 - 1120.0) + 1120.0;
    let kw = x[7] * (12045.0 - 9855.0) + 9855.0;
    let m1 = 2.0 * PI * tu * (hu - hl);
    let m2 = libm::log(r / rw);
    let m3 = 1.0 + 2.0 * l * tu / (m2 * rw * rw * kw) + tu / tl;
    Ok(m1 / m2 / m3)
}

/// Default Michalewicz steepness.
pub const MICHALEWICZ_M: f64 = 10.0;

/// `-sum_i sin(x_i) sin(i x_i^2 / pi)^(2M)` on `[0, pi]^p`, `i` from 1.
pub fn michalewicz(x: &[f64], m: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::input("michalewicz needs at least one input"));
    }
    if !(m > 0.0) {
        return Err(Error::input("michalewicz steepness must be positive"));
    }
    if !x.iter().all(|v| (0.0..=PI).contains(v)) {
        return Err(Error::input("michalewicz inputs must lie in [0, pi]"));
    }
    let mut s = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let inner = libm::sin((i + 1) as f64 * xi * xi / PI);
        s -= libm::sin(xi) * libm::pow(inner * inner, m);
    }
    Ok(s)
}

/// Smooth multimodal surface on `[-2, 2]^2` used for illustrations:
///
/// ```text
/// f(x, y) = exp(-(x^2 + y^2) / 4) (cos 2x + cos 2y)
///         + 0.5 exp(-(x^2 + y^2)) cos 3x cos 3y
/// ```
///
/// It is even in each coordinate and `f(0, 0) = 2.5`.
pub fn test_function_2d(x: &[f64]) -> Result<f64> {
    check_dim(2, x.len())?;
    let (a, b) = (x[0], x[1]);
    let r2 = a * a + b * b;
    Ok(libm::exp(-r2 / 4.0) * (libm::cos(2.0 * a) + libm::cos(2.0 * b))
        + 0.5 * libm::exp(-r2) * libm::cos(3.0 * a) * libm::cos(3.0 * b))
}

/// Latin hypercube sample of `n` points in `[0,1]^p`: each column has one
/// point per interval `[k/n, (k+1)/n)`, placed uniformly within it.
pub fn lhs_design(n: usize, p: usize, seed: u64) -> Result<DesignMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::input("LHS needs n >= 1 and p >= 1"));
    }
    let mut r = rng::seeded(seed);
    let mut data = alloc::vec![0.0; n * p];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..p {
        perm.shuffle(&mut r);
        for (i, &cell) in perm.iter().enumerate() {
            let u: f64 = r.random();
            // guard against rounding up into the next cell
            let v = (cell as f64 + u) / n as f64;
            data[i * p + k] = v.min(libm::nextafter((cell + 1) as f64 / n as f64, 0.0));
        }
    }
    DesignMatrix::from_flat(data, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineType {
    Linear,
    Quadratic,
    Cubic,
    Exponential,
    NaturalLog,
}

impl LineType {
    pub const ALL: [LineType; 5] =
        [LineType::Linear, LineType::Quadratic, LineType::Cubic, LineType::Exponential, LineType::NaturalLog];

    /// Curve height at `t` in `[0, 1]`, rescaled so the curve ends at 1.
    pub fn height(self, t: f64) -> f64 {
        match self {
            LineType::Linear => t,
            LineType::Quadratic => t * t,
            LineType::Cubic => t * t * t,
            LineType::Exponential => libm::expm1(t) / libm::expm1(1.0),
            LineType::NaturalLog => libm::log1p(t) / libm::log(2.0),
        }
    }
}

/// Base curve through the origin, `resolution` points with evenly spaced
/// abscissae on `[0, 1]`.
pub fn base_curve(line: LineType, resolution: usize) -> Vec<[f64; 2]> {
    let last = (resolution.max(2) - 1) as f64;
    (0..resolution)
        .map(|i| {
            let t = i as f64 / last;
            [t, line.height(t)]
        })
        .collect()
}

/// `p -> shift + scale * p` per coordinate; a negative scale reflects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTransform {
    pub scale: [f64; 2],
    pub shift: [f64; 2],
}

impl PathTransform {
    pub const IDENTITY: PathTransform = PathTransform { scale: [1.0, 1.0], shift: [0.0, 0.0] };

    pub fn apply(&self, curve: &[[f64; 2]]) -> Vec<[f64; 2]> {
        curve.iter().map(|p| [self.shift[0] + self.scale[0] * p[0], self.shift[1] + self.scale[1] * p[1]]).collect()
    }

    /// Scales uniform on a quarter to the full rectangle side, independent
    /// sign flips, and an origin uniform in the rectangle.
    pub fn random<R: Rng + ?Sized>(rect: &Rect, rng: &mut R) -> Self {
        let (w, h) = (rect.width(), rect.height());
        let mut draw_scale = |side: f64| {
            let s = side * rng.random_range(0.25..=1.0);
            if rng.random_bool(0.5) {
                -s
            } else {
                s
            }
        };
        let scale = [draw_scale(w), draw_scale(h)];
        let shift = [rng.random_range(rect.xmin..=rect.xmax), rng.random_range(rect.ymin..=rect.ymax)];
        Self { scale, shift }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax && xmin.is_finite() && xmax.is_finite() && ymin.is_finite() && ymax.is_finite())
        {
            return Err(Error::input("rectangle needs finite xmin < xmax and ymin < ymax"));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn contains(&self, p: &[f64; 2]) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    pub fn inside_fraction(&self, pts: &[[f64; 2]]) -> f64 {
        pts.iter().filter(|p| self.contains(p)).count() as f64 / pts.len() as f64
    }
}

/// Attempts per path before giving up.
pub const PATH_REJECTION_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    /// Fixed curve type, or `None` to draw one uniformly per path.
    pub line_type: Option<LineType>,
    pub resolution: usize,
    pub rect: Rect,
    pub min_inside_fraction: f64,
    pub seed: u64,
}

impl PathSpec {
    pub fn new(rect: Rect, seed: u64) -> Self {
        Self { line_type: None, resolution: 100, rect, min_inside_fraction: 0.5, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::input("path resolution must be at least 2"));
        }
        if !(self.min_inside_fraction > 0.0 && self.min_inside_fraction <= 1.0) {
            return Err(Error::input("inside fraction must be in (0, 1]"));
        }
        Rect::new(self.rect.xmin, self.rect.xmax, self.rect.ymin, self.rect.ymax).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPath {
    pub line_type: LineType,
    pub transform: PathTransform,
    pub points: PredictionSet,
}

/// `count` random paths; path `i` draws from its own seed stream. The line
/// type is drawn once per path and only the transform is resampled on
/// rejection, so accepted types stay uniform.
pub fn gen_paths_2d(spec: &PathSpec, count: usize) -> Result<Vec<GeneratedPath>> {
    spec.validate()?;
    (0..count)
        .map(|i| {
            let mut r = rng::stream(spec.seed, i as u64);
            let line = match spec.line_type {
                Some(t) => t,
                None => LineType::ALL[r.random_range(0..LineType::ALL.len())],
            };
            let base = base_curve(line, spec.resolution);
            for _ in 0..PATH_REJECTION_LIMIT {
                let transform = PathTransform::random(&spec.rect, &mut r);
                let pts = transform.apply(&base);
                if spec.rect.inside_fraction(&pts) >= spec.min_inside_fraction {
                    return Ok(GeneratedPath { line_type: line, transform, points: PredictionSet::from_rows(&pts)? });
                }
            }
            Err(Error::RejectionLimit(PATH_REJECTION_LIMIT))
        })
        .collect()
}
