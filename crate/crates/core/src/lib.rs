//! Truncated power variations of sampled paths and the diagnostics built on
//! them: spike excision, variation curves over the step multiple, log-ratio
//! curves, a continuous/jump/neither classifier, and path simulators for
//! validation.

// `!(a < b)` comparisons deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod registry;
pub mod segmentation;
pub mod series;
pub mod simulation;
pub mod variations;

pub use error::{Error, Result};
