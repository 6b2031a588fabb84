use thiserror::Error;

pub type Result<T> = std::result::Result<T, FanError>;

#[derive(Debug, Error)]
pub enum FanError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("format error: {0}")]
    Format(String),
}

impl FanError {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            FanError::InvalidInput(_) => "invalid-input",
            FanError::InvalidLength(_) => "invalid-length",
            FanError::InvalidParameter(_) => "invalid-parameter",
            FanError::Shape(_) => "shape",
            FanError::Index(_) => "index",
            FanError::State(_) => "state",
            FanError::NonFinite(_) => "non-finite",
            FanError::Io { .. } => "io",
            FanError::Parse { .. } => "parse",
            FanError::Format(_) => "format",
        }
    }
}

pub(crate) fn shape_err(what: impl Into<String>) -> FanError {
    FanError::Shape(what.into())
}
