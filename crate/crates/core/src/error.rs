use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid item {id}: {reason}")]
    InvalidItem { id: String, reason: String },

    #[error("trace error at t={t}: {reason}")]
    Trace { t: u64, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{0} is not placed in this solution")]
    NotPlaced(String),

    #[error("item kind {kind} is not supported by {algorithm}")]
    Unsupported { kind: String, algorithm: String },

    #[error("instance too large for exhaustive oracle: {size} > {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("offline repacker failed: {0}")]
    Offline(String),

    #[error("migration factor undefined: no volume inserted or departed yet")]
    UndefinedFactor,
}

pub type Result<T, E = PackError> = std::result::Result<T, E>;
