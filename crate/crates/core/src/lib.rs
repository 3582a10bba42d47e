//! Randomized incomplete U-statistics with multiplier-bootstrap inference.
//!
//! The crate covers exact index-set combinatorics, the built-in rank kernels,
//! complete and incomplete estimators, Hajek projection estimates, the
//! bootstrap procedures and a Monte Carlo harness.

pub mod bootstrap;
pub mod combinat;
pub mod data;
pub mod error;
pub mod hajek;
pub mod infer;
pub mod kernels;
mod reduce;
pub mod rng;
pub mod sim;
pub mod ustat;

pub use data::Dataset;
pub use error::{Error, Result};
pub use kernels::{FnKernel, Kernel, KernelSpec, PairwiseKernel, RankKernel};
pub use rng::{RngStream, SeedRecord};
pub use ustat::{IncompleteUStat, SamplingRealization, SamplingScheme, SamplingVariant};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
