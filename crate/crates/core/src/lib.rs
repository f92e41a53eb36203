//! Random forests whose predictions are rewritten exactly as weighted
//! averages of training labels through GAP proximities, plus the
//! instance-based explanations and confidence scores built on those weights.

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod forest;
pub mod proximity;

pub use error::{Error, Result};
pub use forest::{BagCounts, Forest, ForestParams, MaxFeatures, ModelFile, Task};
