use thiserror::Error;

/// Errors raised by the characterization library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("not completely positive: chi eigenvalue {eigenvalue:.3e}")]
    NotCompletelyPositive { eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
