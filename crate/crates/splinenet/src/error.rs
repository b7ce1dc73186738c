use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("index {index} out of range ({max} valid)")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArg(msg.into())
    }
}
