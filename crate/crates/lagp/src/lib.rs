//! Parallel drivers, file formats, the comparator pipeline and benchmark
//! experiments for local approximate GP emulation.
//!
//! All numerics live in [`lagp_core`]; this crate adds rayon parallelism
//! over independent jobs (query points, bootstrap replicates, paths), CSV
//! input and output, and the `lagp` command-line tool. Every job derives its
//! randomness from a master seed and its own index, and results are
//! collected in input order, so outputs do not depend on the thread count.

pub use lagp_core as core;

pub mod bench;
pub mod error;
pub mod io;
pub mod parallel;
pub mod paths;
pub mod pipeline;

pub use error::{Error, ErrorClass, Result};
