//! Error types shared across the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Fewer than 3 correspondences, or the centered cross-covariance has
    /// rank < 2. Callers typically fall back to a translation-only fit.
    #[error("degenerate correspondence set: need >= 3 non-collinear pairs")]
    DegenerateInput,

    #[error("spatial index built over zero points")]
    EmptyIndex,

    #[error("duplicate candidate pair ({src}, {dst})")]
    DuplicateCandidate { src: usize, dst: usize },

    #[error("{context}: expected length {expected}, got {actual}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("mask selects no points")]
    EmptyMask,

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
