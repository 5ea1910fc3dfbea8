use alloc::vec::Vec;

use crate::design::{sq_dist, DesignMatrix};

/// Linear-interpolation quantile (type 7) of an unsorted sample.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub(crate) fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub(crate) fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Pairwise squared distances over at most `max_rows` rows, taken at an even
/// stride so the result is deterministic.
pub(crate) fn pairwise_sq_distances(design: &DesignMatrix, max_rows: usize) -> Vec<f64> {
    let n = design.rows();
    let stride = n.div_ceil(max_rows.max(2)).max(1);
    let rows: Vec<&[f64]> = (0..n).step_by(stride).map(|i| design.row(i)).collect();
    let mut out = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in 0..i {
            out.push(sq_dist(rows[i], rows[j]));
        }
    }
    out
}
