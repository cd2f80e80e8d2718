use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter record failed its own invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A point or time lies outside the domain of the function being evaluated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Covariance matrix is not strictly positive-definite.
    #[error("singular covariance matrix (det = {det:e})")]
    SingularCovariance { det: f64 },

    /// A series failed to reach the requested tolerance.
    #[error("series did not converge within {terms} terms")]
    NoConvergence { terms: usize },

    /// The requested combination is not covered by a closed form.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A numerical routine produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
