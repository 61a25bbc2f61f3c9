//! Error type shared by the model family (rbm, dbn, baselines).

use thiserror::Error;

/// Upper bound on D+K for the exhaustive-enumeration oracles.
pub const EXACT_ENUM_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training data must contain both classes")]
    SingleClassData,
    #[error("training data must be finite and lie in [0, 1]")]
    DataOutOfRange,
    #[error("exact enumeration requires D+K <= {EXACT_ENUM_LIMIT}, got D={d}, K={k}")]
    EnumerationGuard { d: usize, k: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model file version {got} unsupported (expected {expected})")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("malformed model file: {0}")]
    MalformedFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
