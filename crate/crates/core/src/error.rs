use thiserror::Error;

/// Errors raised while validating parameters or building a run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its invariant. `key` is the dotted
    /// configuration path (e.g. `sensor.a`).
    #[error("invalid value for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("cell index {index} out of range for a grid of {cells} cells")]
    CellOutOfRange { index: usize, cells: usize },

    #[error("range must be non-negative, got {0}")]
    NegativeRange(f64),
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Dotted configuration key this error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            Error::Config { key, .. } => Some(key),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
