use thiserror::Error;

/// Failure categories shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("accuracy target not met for {what}: achieved {achieved:e}, requested {requested:e}")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },
    #[error("root not found: {0}")]
    NotFound(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable label for the category.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Unsupported(_) => "unsupported",
            Error::Accuracy { .. } => "accuracy",
            Error::NotFound(_) => "not_found",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
