use thiserror::Error;

use crate::decomposition::PartialExtraction;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("densification refused: n = {n} exceeds cap {cap}")]
    DensifyCap { n: usize, cap: usize },

    #[error("moment problem too large: moment matrix side {side} exceeds cap {cap}")]
    MomentCap { side: usize, cap: usize },

    #[error("operator and adjoint disagree: |<Au,v> - <u,A^T v>| = {discrepancy:e}")]
    AdjointMismatch { discrepancy: f64 },

    #[error("{what} did not converge (residual {residual:e} after {iterations} iterations)")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error(
        "tensor has no component form; use the moment relaxation for component-free certification"
    )]
    MissingComponents,

    #[error("extraction stalled at component {index} after exhausting restarts ({} accepted)", .partial.accepted.len())]
    ExtractionStall {
        index: usize,
        partial: Box<PartialExtraction>,
    },

    #[error("malformed tensor file: header field `{field}`: {reason}")]
    Format { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(field: &str, reason: impl Into<String>) -> Self {
        Error::Format {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
