//! Balanced k-means by alternating minimization with an optimal-transport
//! assignment step.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assignment;
pub mod ballot;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod init;
pub mod io;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod transport;

pub use ballot::{run, RunConfig, RunTrace, Variant};
pub use error::{Error, Result};
pub use model::{Centroids, ClusterAssignment, Coupling, Dataset};
