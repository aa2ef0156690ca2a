//! Mislabel detection with Extreme Learning Machines.
//!
//! The pipeline encodes heterogeneous records into a numeric matrix, trains
//! ELM models whose leave-one-out error is available in closed form, and
//! scores each sample by how often relabeling it lowers that error.

pub mod classifier;
pub mod datasets;
pub mod detector;
pub mod elm;
pub mod encoding;
pub mod error;
pub mod model;
pub mod press;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
