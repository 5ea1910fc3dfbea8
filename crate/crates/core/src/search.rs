//! Incremental bookkeeping for greedy ALC search over a fixed candidate set.
//!
//! For a local GP with Cholesky factor `L` on `X_j`, write `z(x) = L^{-1} k_j(x)`.
//! The variance reduction at reference `w` from adding candidate `c` is
//!
//! ```text
//! (K(c, w) - z(c)^T z(w))^2 / v_j(c),   v_j(c) = 1 + nugget - z(c)^T z(c)
//! ```
//!
//! which is the expanded ALC expression with `g_j(c) = -K_j^{-1} k_j(c) / v_j(c)`
//! collected into a square. When the factor gains a row `(l, d)` for a new
//! design point `x`, every `z` gains one entry `(K(x, .) - l^T z) / d`, so each
//! greedy step costs `O(j + |W|)` per candidate instead of a fresh solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::DesignMatrix;
use crate::gp::GpModel;
use crate::kernel::corr;
use crate::linalg::dot;

/// Candidates whose unscaled predictive variance falls to this level are
/// indistinguishable from the current design and are skipped.
pub const CANDIDATE_TOL: f64 = 1e-12;

pub(crate) struct AlcSearch<'a> {
    design: &'a DesignMatrix,
    candidates: Vec<usize>,
    available: Vec<bool>,
    refs: DesignMatrix,
    lengthscales: Vec<f64>,
    nugget: f64,
    cap: usize,
    absorbed: usize,
    z_cand: Vec<f64>,
    zz_cand: Vec<f64>,
    z_ref: Vec<f64>,
    k_cross: Vec<f64>,
    dots: Vec<f64>,
}

impl<'a> AlcSearch<'a> {
    /// `candidates` are global row indices; `cap` bounds the design size.
    pub fn new(
        design: &'a DesignMatrix,
        candidates: Vec<usize>,
        refs: &DesignMatrix,
        model: &GpModel,
        cap: usize,
    ) -> Self {
        let lengthscales = model.hyper().lengthscales().to_vec();
        let nc = candidates.len();
        let nr = refs.rows();
        let mut k_cross = Vec::with_capacity(nc * nr);
        for &c in &candidates {
            let xc = design.row(c);
            k_cross.extend(refs.iter_rows().map(|w| corr(xc, w, &lengthscales)));
        }
        let mut s = Self {
            design,
            available: vec![true; nc],
            candidates,
            refs: refs.clone(),
            nugget: model.hyper().nugget(),
            lengthscales,
            cap,
            absorbed: 0,
            z_cand: vec![0.0; nc * cap],
            zz_cand: vec![0.0; nc],
            z_ref: vec![0.0; nr * cap],
            k_cross,
            dots: vec![0.0; nc * nr],
        };
        s.absorb(model);
        s
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }


    pub fn mark_used(&mut self, slot: usize) {
        self.available[slot] = false;
    }



    /// Bring the state up to date with rows of `model` not yet absorbed.
    pub fn absorb(&mut self, model: &GpModel) {
        let chol = model.cholesky();
        let nr = self.refs.rows();
        let cap = self.cap;
        while self.absorbed < model.len() {
            let r = self.absorbed;
            assert!(r < cap, "design grew past search capacity");
            let xr = model.design().row(r);
            let row = chol.row(r);
            let (l, d) = (&row[..r], row[r]);
            let mut znew_ref = Vec::with_capacity(nr);
            for (i, w) in self.refs.iter_rows().enumerate() {
                let z = &mut self.z_ref[i * cap..i * cap + cap];
                let v = (corr(xr, w, &self.lengthscales) - dot(l, &z[..r])) / d;
                z[r] = v;
                znew_ref.push(v);
            }
            for (slot, &c) in self.candidates.iter().enumerate() {
                let z = &mut self.z_cand[slot * cap..slot * cap + cap];
                let v = (corr(xr, self.design.row(c), &self.lengthscales) - dot(l, &z[..r])) / d;
                z[r] = v;
                self.zz_cand[slot] += v * v;
                for (dst, zw) in self.dots[slot * nr..(slot + 1) * nr].iter_mut().zip(&znew_ref) {
                    *dst += v * zw;
                }
            }
            self.absorbed += 1;
        }
    }

    /// Unscaled predictive variance at the candidate in `slot`.
    pub fn variance(&self, slot: usize) -> f64 {
        1.0 + self.nugget - self.zz_cand[slot]
    }

    /// Mean variance reduction over the references, or `None` if rejected.
    pub fn score(&self, slot: usize) -> Option<f64> {
        let v = self.variance(slot);
        if !(v > CANDIDATE_TOL) {
            return None;
        }
        let nr = self.refs.rows();
        let kc = &self.k_cross[slot * nr..(slot + 1) * nr];
        let dc = &self.dots[slot * nr..(slot + 1) * nr];
        let s: f64 = kc.iter().zip(dc).map(|(k, d)| (k - d) * (k - d)).sum();
        Some(s / (v * nr as f64))
    }

    /// Best available slot; ties go to the lower global row index.
    pub fn best(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for slot in 0..self.candidates.len() {
            if !self.available[slot] {
                continue;
            }
            let Some(s) = self.score(slot) else { continue };
            best = match best {
                None => Some((slot, s)),
                Some((b, bs)) => {
                    if s > bs || (s == bs && self.candidates[slot] < self.candidates[b]) {
                        Some((slot, s))
                    } else {
                        Some((b, bs))
                    }
                }
            };
        }
        best
    }
}
