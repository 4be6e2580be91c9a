use thiserror::Error;

/// Errors surfaced by the library. Numerical problems (NaN/Inf) are reported
/// eagerly instead of letting them propagate through downstream math.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sampled index {index} has zero proposal mass")]
    ZeroMassIndex { index: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Diverged { iteration: u64, loss: f64 },

    #[error("checkpoint config hash mismatch: checkpoint {found:#x}, current {expected:#x}")]
    ConfigHashMismatch { expected: u64, found: u64 },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn non_finite(context: impl Into<String>) -> Self {
        CoreError::NonFinite {
            context: context.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
