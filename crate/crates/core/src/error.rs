use thiserror::Error;

/// Errors raised by model validation and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    NonPositiveParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("correlation matrix is not positive definite ({detail})")]
    CorrelationNotPositiveDefinite { detail: String },
    #[error("|rho_vd| = 1 makes the Cholesky factorisation degenerate")]
    RhoVdDegenerate,
    #[error("first Cholesky row is inconsistent: 1 - a12^2 - a13^2 - a14^2 = {residual}")]
    RowOneDegenerate { residual: f64 },
    #[error("tridiagonal system is singular (pivot {pivot:e} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("unsupported contract for this estimator: {0}")]
    UnsupportedContract(&'static str),
    #[error("mean reversion speed k must be non-zero")]
    KZero,
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("rho_sd and rho_sf are both zero")]
    BothZero,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by the inputs rather than the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveParameter { .. }
                | Error::CorrelationNotPositiveDefinite { .. }
                | Error::RhoVdDegenerate
                | Error::RowOneDegenerate { .. }
                | Error::InvalidContract(_)
                | Error::InvalidArgument(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
