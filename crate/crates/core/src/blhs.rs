//! Block Latin hypercube subsampling and bootstrapped global lengthscales.
//!
//! Each normalized input dimension is cut into `m` equal intervals, giving
//! `m^d` blocks. A draw picks `m` blocks in Latin arrangement: block `b` sits
//! at interval `pi_k(b)` in dimension `k` for independent random permutations
//! `pi_k`, so every interval of every dimension is used exactly once. All rows
//! falling in a chosen block form the subsample, of expected size
//! `N m^(1-d)` for space-filling data.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::design::DesignMatrix;
use crate::error::{check_dim, Error, Result};
use crate::kernel::Hyperparams;
use crate::mle::{default_start, mle_lengthscales, LengthscaleBounds, MleOptions};
use crate::rng;
use crate::stats::{mean, median};

/// Default number of bootstrap repetitions.
pub const DEFAULT_BOOTSTRAP: usize = 30;
/// Largest expected subsample targeted by [`choose_blocks`].
pub const DEFAULT_TARGET_SIZE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Median,
    Mean,
}

impl Aggregator {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregator::Median => median(values),
            Aggregator::Mean => mean(values),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsampleMode {
    Blhs,
    /// Uniform subsets of size `round(N m^(1-d))`, matching the BLHS
    /// expectation.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleSpec {
    /// Blocks per dimension.
    pub m: usize,
    pub bootstrap_count: usize,
    pub aggregator: Aggregator,
    pub mode: SubsampleMode,
    pub seed: u64,
}

impl SubsampleSpec {
    pub fn new(m: usize, seed: u64) -> Self {
        Self { m, bootstrap_count: DEFAULT_BOOTSTRAP, aggregator: Aggregator::Median, mode: SubsampleMode::Blhs, seed }
    }

    /// Blocks chosen by [`choose_blocks`] for the given data size.
    pub fn for_data(rows: usize, dim: usize, seed: u64) -> Self {
        Self::new(choose_blocks(rows, dim, DEFAULT_TARGET_SIZE), seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::input("blocks per dimension must be at least 1"));
        }
        if self.bootstrap_count == 0 {
            return Err(Error::input("bootstrap count must be at least 1"));
        }
        Ok(())
    }
}

/// `N m^(1-d)`.
pub fn expected_blhs_size(rows: usize, dim: usize, m: usize) -> f64 {
    rows as f64 * libm::pow(m as f64, 1.0 - dim as f64)
}

/// Smallest `m` whose expected subsample is at most `target`. In one
/// dimension the size does not depend on `m`, and 1 is returned.
pub fn choose_blocks(rows: usize, dim: usize, target: f64) -> usize {
    if dim <= 1 {
        return 1;
    }
    let mut m = 1;
    while expected_blhs_size(rows, dim, m) > target && m < rows.max(1) {
        m += 1;
    }
    m
}

/// Interval of a normalized coordinate. Intervals are `[k/m, (k+1)/m)`
/// with the last one closed.
pub fn interval_index(u: f64, m: usize) -> usize {
    let i = libm::floor(u * m as f64);
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(m - 1)
    }
}

/// Per-row interval indices for a fixed `m`, computed once and reused by
/// every bootstrap draw.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    m: usize,
    dim: usize,
    cells: Vec<usize>,
}

impl BlockGrid {
    pub fn new(design: &DesignMatrix, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::input("blocks per dimension must be at least 1"));
        }
        let (unit, _) = design.normalized();
        let cells = unit.as_flat().iter().map(|&u| interval_index(u, m)).collect();
        Ok(Self { m, dim: design.dim(), cells })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> usize {
        self.cells.len() / self.dim
    }

    /// Interval indices of row `i`.
    pub fn cell(&self, i: usize) -> &[usize] {
        &self.cells[i * self.dim..(i + 1) * self.dim]
    }

    /// One Latin draw of blocks and the rows inside them (possibly none).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> BlhsSubsample {
        let (m, d) = (self.m, self.dim);
        let mut perms: Vec<Vec<usize>> = Vec::with_capacity(d);
        for _ in 0..d {
            let mut p: Vec<usize> = (0..m).collect();
            p.shuffle(rng);
            perms.push(p);
        }
        // block owning level c in the first dimension
        let mut inv0 = vec![0; m];
        for (b, &c) in perms[0].iter().enumerate() {
            inv0[c] = b;
        }
        let indices = (0..self.rows())
            .filter(|&i| {
                let cell = self.cell(i);
                let b = inv0[cell[0]];
                cell.iter().zip(&perms).all(|(&c, p)| p[b] == c)
            })
            .collect();
        let blocks = (0..m).map(|b| perms.iter().map(|p| p[b]).collect()).collect();
        BlhsSubsample { indices, blocks }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlhsSubsample {
    /// Selected rows, ascending.
    pub indices: Vec<usize>,
    /// Interval indices of each selected block, one entry per dimension.
    pub blocks: Vec<Vec<usize>>,
}

fn draw_nonempty<R: Rng + ?Sized>(grid: &BlockGrid, rng: &mut R) -> Result<BlhsSubsample> {
    let s = grid.draw(rng);
    if !s.indices.is_empty() {
        return Ok(s);
    }
    let s = grid.draw(rng);
    if s.indices.is_empty() {
        return Err(Error::EmptySubsample);
    }
    Ok(s)
}

/// One BLHS draw over the design's normalized inputs. An empty draw is
/// retried once.
pub fn blhs_subsample(design: &DesignMatrix, m: usize, seed: u64) -> Result<BlhsSubsample> {
    let grid = BlockGrid::new(design, m)?;
    draw_nonempty(&grid, &mut rng::seeded(seed))
}

/// `size` distinct rows chosen uniformly, ascending.
pub fn random_subsample(rows: usize, size: usize, seed: u64) -> Result<Vec<usize>> {
    random_subsample_with(rows, size, &mut rng::seeded(seed))
}

fn random_subsample_with<R: Rng + ?Sized>(rows: usize, size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if size == 0 || size > rows {
        return Err(Error::input("random subsample size must be in 1..=N"));
    }
    let mut idx = rand::seq::index::sample(rng, rows, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Aggregated lengthscale estimates with the per-replicate values
/// (`None` where a replicate's fit failed).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalScale {
    pub lengthscales: Vec<f64>,
    pub replicates: Vec<Option<Vec<f64>>>,
}

impl GlobalScale {
    pub fn failures(&self) -> usize {
        self.replicates.iter().filter(|r| r.is_none()).count()
    }
}

/// Shared state for bootstrap replicates so that they can be run in any
/// order (or concurrently) and give identical results.
#[derive(Debug, Clone)]
pub struct Bootstrap<'a> {
    design: &'a DesignMatrix,
    responses: &'a [f64],
    spec: SubsampleSpec,
    grid: Option<BlockGrid>,
    random_size: usize,
    bounds: LengthscaleBounds,
    nugget: f64,
}

impl<'a> Bootstrap<'a> {
    pub fn new(design: &'a DesignMatrix, responses: &'a [f64], spec: &SubsampleSpec, nugget: f64) -> Result<Self> {
        spec.validate()?;
        check_dim(design.rows(), responses.len())?;
        let (grid, random_size) = match spec.mode {
            SubsampleMode::Blhs => (Some(BlockGrid::new(design, spec.m)?), 0),
            SubsampleMode::Random => {
                let e = libm::round(expected_blhs_size(design.rows(), design.dim(), spec.m)) as usize;
                (None, e.clamp(1, design.rows()))
            }
        };
        Ok(Self {
            design,
            responses,
            spec: spec.clone(),
            grid,
            random_size,
            bounds: LengthscaleBounds::from_design(design),
            nugget,
        })
    }

    pub fn count(&self) -> usize {
        self.spec.bootstrap_count
    }

    /// Rows used by replicate `b`.
    pub fn subsample(&self, b: usize) -> Result<Vec<usize>> {
        let mut r = rng::stream(self.spec.seed, b as u64);
        match &self.grid {
            Some(g) => draw_nonempty(g, &mut r).map(|s| s.indices),
            None => random_subsample_with(self.design.rows(), self.random_size, &mut r),
        }
    }

    /// Separable MLE on replicate `b`'s subsample.
    pub fn replicate(&self, b: usize) -> Result<Vec<f64>> {
        let idx = self.subsample(b)?;
        let x = self.design.select(&idx);
        let y: Vec<f64> = idx.iter().map(|&i| self.responses[i]).collect();
        let init = Hyperparams::isotropic(self.bounds.clamp(default_start(&x)), x.dim(), self.nugget)?;
        let fit = mle_lengthscales(&x, &y, &init, &self.bounds, &MleOptions::default())?;
        Ok(fit.hyper.lengthscales().to_vec())
    }

    /// Combine replicate results; errors when more than half failed.
    pub fn aggregate(&self, results: Vec<Result<Vec<f64>>>) -> Result<GlobalScale> {
        let total = results.len();
        let replicates: Vec<Option<Vec<f64>>> = results.into_iter().map(|r| r.ok()).collect();
        let ok: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
        let failed = total - ok.len();
        if ok.is_empty() || 2 * failed > total {
            return Err(Error::BootstrapFailed { failed, total });
        }
        let lengthscales = (0..self.design.dim())
            .map(|k| {
                let col: Vec<f64> = ok.iter().map(|r| r[k]).collect();
                self.spec.aggregator.apply(&col)
            })
            .collect();
        Ok(GlobalScale { lengthscales, replicates })
    }
}

/// Serial bootstrap of separable lengthscale estimates.
pub fn bootstrap_lengthscales(
    design: &DesignMatrix,
    responses: &[f64],
    spec: &SubsampleSpec,
    nugget: f64,
) -> Result<GlobalScale> {
    let boot = Bootstrap::new(design, responses, spec, nugget)?;
    let results = (0..boot.count()).map(|b| boot.replicate(b)).collect();
    boot.aggregate(results)
}

/// Divide column `j` by `sqrt(theta_j)`.
pub fn prescale(design: &DesignMatrix, lengthscales: &[f64]) -> Result<DesignMatrix> {
    check_dim(design.dim(), lengthscales.len())?;
    if !lengthscales.iter().all(|t| *t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidHyperparams("prescale lengthscales must be positive and finite"));
    }
    let factors: Vec<f64> = lengthscales.iter().map(|t| libm::sqrt(*t)).collect();
    design.scale_columns(&factors)
}

/// Inverse of [`prescale`].
pub fn unprescale(design: &DesignMatrix, lengthscales: &[f64]) -> Result<DesignMatrix> {
    check_dim(design.dim(), lengthscales.len())?;
    if !lengthscales.iter().all(|t| *t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidHyperparams("prescale lengthscales must be positive and finite"));
    }
    let factors: Vec<f64> = lengthscales.iter().map(|t| 1.0 / libm::sqrt(*t)).collect();
    design.scale_columns(&factors)
}
