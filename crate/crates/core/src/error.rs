use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or parameter.
    #[error("{0}")]
    Config(String),
    /// Malformed, inconsistent or insufficient input data.
    #[error("{0}")]
    Data(String),
    /// Non-finite values or a numerically degenerate computation.
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Prefixes the message with the pipeline stage that failed, keeping the
    /// error class (and therefore the exit code).
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{stage}: {m}")),
            Error::Data(m) => Error::Data(format!("{stage}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("{stage}: {m}")),
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{stage}: {e}"))),
            Error::Json(e) => Error::Data(format!("{stage}: json error: {e}")),
            Error::Csv(e) => Error::Data(format!("{stage}: csv error: {e}")),
        }
    }

    /// Process exit code for this error class: 2 config, 3 data, 4 numeric, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Json(_) | Error::Csv(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
