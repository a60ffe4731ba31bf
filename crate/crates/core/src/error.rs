use thiserror::Error;

/// Errors raised across the library.
///
/// `Validation` and `Dimension` signal bad input; the rest are numerical failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("eigenvalue collision: {0}")]
    EigenCollision(String),
    #[error("complex eigenvalues: {0}")]
    ComplexEigen(String),
    #[error("singular gram matrix; retry with a positive l2 regularization ({0})")]
    SingularGram(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(String),
    #[error("format: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_) | Error::Validation(_) | Error::Io(_) | Error::Format(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
