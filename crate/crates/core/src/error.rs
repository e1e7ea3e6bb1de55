use thiserror::Error;

/// Errors raised by kernel evaluation, geometry and the verification suites.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or quadrature did not reach its tolerance within the allowed work.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// A Gram matrix was singular or too badly conditioned to factor.
    #[error("conditioning failure: {0}")]
    Conditioning(String),

    /// Invalid configuration (unknown suite, bad tolerance, malformed grid).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
