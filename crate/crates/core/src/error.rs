use thiserror::Error;

pub type Result<T, E = FusionError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("non-finite observation at row {row}")]
    NonFiniteObservation { row: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("chain initialization failed: {0}")]
    Initialization(String),

    #[error("cannot construct dataset: {0}")]
    Construction(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("internal numerical failure: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FusionError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        FusionError::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        FusionError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
