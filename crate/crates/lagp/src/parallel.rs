//! Thread pools and the parallel counterparts of the serial core drivers.
//!
//! Work items are independent and read shared data only; `collect` on an
//! indexed parallel iterator keeps input order.

use lagp_core::blhs::{Bootstrap, GlobalScale, SubsampleSpec};
use lagp_core::local::{predict_local, LocalPrediction};
use lagp_core::{DesignMatrix, Hyperparams, SearchConfig};
use rayon::prelude::*;

use crate::Result;

/// Run `f` on a dedicated pool of `threads` workers (0 picks the number of
/// available cores).
pub fn install<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

/// Local prediction at every test row, one result per row in row order.
pub fn predict_surface(
    design: &DesignMatrix,
    responses: &[f64],
    test: &DesignMatrix,
    cfg: &SearchConfig,
    hyper: &Hyperparams,
) -> Vec<lagp_core::Result<LocalPrediction>> {
    (0..test.rows()).into_par_iter().map(|i| predict_local(design, responses, test.row(i), cfg, hyper)).collect()
}

/// Bootstrapped global lengthscales with replicates fitted concurrently.
pub fn bootstrap_lengthscales(
    design: &DesignMatrix,
    responses: &[f64],
    spec: &SubsampleSpec,
    nugget: f64,
) -> Result<GlobalScale> {
    let boot = Bootstrap::new(design, responses, spec, nugget)?;
    let results = (0..boot.count()).into_par_iter().map(|b| boot.replicate(b)).collect();
    Ok(boot.aggregate(results)?)
}
