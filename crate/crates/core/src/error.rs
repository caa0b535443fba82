use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate series: variance is zero")]
    DegenerateSeries,

    #[error("integrated autocorrelation time did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate covariance: Cholesky factorization failed after {attempts} jitter attempts")]
    DegenerateCovariance { attempts: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
