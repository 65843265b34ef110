use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Unfiltered kernel evaluated at coincident points.
    #[error("kernel singularity at r = {0}")]
    Singularity(f64),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("accuracy failure: best estimate {estimate:e} with error bound {error:e}")]
    AccuracyFailure { estimate: f64, error: f64 },

    #[error("numerically singular system (condition estimate {0:e})")]
    SingularSystem(f64),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
