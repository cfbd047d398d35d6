use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv: {0}")]
    Csv(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series too short: need at least {need}, got {got}")]
    TooShort { need: usize, got: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("duplicate date {0}")]
    DuplicateDate(String),

    #[error("scaler has not been fitted")]
    UnfittedScaler,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular regression on segment [{start}, {end})")]
    SingularSegment { start: usize, end: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
