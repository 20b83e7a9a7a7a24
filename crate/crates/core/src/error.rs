use thiserror::Error;

/// Errors raised across the toolkit. Each variant maps to one CLI exit class.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("kernel is not admissible: {0}")]
    Inadmissible(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: value {value:e}, error estimate {error:e}")]
    Quadrature { lo: f64, hi: f64, value: f64, error: f64 },

    #[error("size guard: {what} needs {requested}, limit is {limit}")]
    TooLarge { what: String, requested: usize, limit: usize },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("margin error: {0}")]
    Margin(String),

    #[error("capacity overflow: {0}")]
    Capacity(String),

    #[error("configuration error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Error::Invalid { key: key.to_string(), reason: reason.into() }
    }

    pub(crate) fn config(path: &str, reason: impl Into<String>) -> Self {
        Error::Config { path: path.to_string(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
