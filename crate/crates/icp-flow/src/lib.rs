//! Learning-free LiDAR scene flow estimation.
//!
//! Two temporally adjacent scans are ego-compensated, ground-stripped, and
//! clustered as one fused point set; clusters are paired across time,
//! aligned with histogram-initialized point-to-point ICP, associated by
//! thresholded argmin (or Hungarian) matching, and the per-cluster rigid
//! transforms are expanded into a per-point flow field. A deterministic
//! synthetic-scene generator provides exact ground truth for evaluation.

pub mod association;
pub mod config;
pub mod error;
pub mod eval;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use error::{Error, Result};
