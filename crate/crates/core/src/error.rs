//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller violated an operation's stated precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation; `field` is the dotted path.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    /// An iterative kernel failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
