use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{field}` = {value} is out of domain: {reason}")]
    ParameterDomain {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("operation `{operation}` is not defined for the {family} family")]
    UnsupportedFamily {
        operation: &'static str,
        family: &'static str,
    },

    #[error("{what} = {requested} exceeds the configured cap {cap}")]
    Resource {
        what: &'static str,
        requested: u64,
        cap: u64,
    },

    #[error("numerical failure in {context}: achieved error estimate {achieved:e}")]
    Numerical {
        context: String,
        achieved: f64,
    },

    #[error("non-finite value in `{parameter}` after sweep {sweep}")]
    NonFinite { sweep: usize, parameter: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, value: f64, reason: &'static str) -> Self {
        Error::ParameterDomain {
            field,
            value,
            reason,
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain { .. }
                | Error::UnsupportedFamily { .. }
                | Error::Validation(_)
                | Error::Parse { .. }
                | Error::Resource { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
