//! Local approximate Gaussian process (laGP) emulation primitives.
//!
//! The crate is `no_std` with `alloc` and contains the numerical core:
//!
//! * [`gp`]: dense zero-mean GP with separable Gaussian correlation, profiled
//!   marginal likelihood, Student-t predictive equations and rank-one
//!   extension of the Cholesky factor.
//! * [`mle`] and [`optim`]: lengthscale estimation with a projected
//!   quasi-Newton optimizer working in log-lengthscale space.
//! * [`local`]: pointwise local designs (nearest neighbour and greedy ALC),
//!   local refits and serial surface prediction.
//! * [`path`]: the joint ("path") ALC criterion for a set of reference
//!   locations, its analytic gradient, derivative-based candidate search with
//!   snapping, and joint predictive sampling.
//! * [`blhs`]: block Latin hypercube subsampling and bootstrapped global
//!   lengthscales used to prescale the inputs.
//! * [`metrics`] and [`benchmarks`]: evaluation metrics, the species mixture
//!   combiner, test functions and design generators.
//!
//! Everything here is deterministic given its inputs and seeds. Parallel
//! drivers, file formats and the CLI live in the `lagp` crate.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod benchmarks;
pub mod blhs;
pub mod design;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod linalg;
pub mod local;
pub mod metrics;
pub mod mle;
pub mod optim;
pub mod path;
pub mod rng;
mod search;
mod stats;

pub use design::DesignMatrix;
pub use error::{Error, Result};
pub use gp::{GpModel, JointPrediction, Prediction};
pub use kernel::{correlation, correlation_matrix, Hyperparams, KernelMode, DEFAULT_NUGGET};
pub use local::{DesignMethod, LocalDesign, SearchConfig, Warning};
pub use path::{PathMethod, PathSearchConfig, PredictionSet};
