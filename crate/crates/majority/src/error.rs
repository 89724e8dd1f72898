use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("covariance not positive definite (smallest eigenvalue {min_eigenvalue:e}){context}")]
    NotPositiveDefinite { min_eigenvalue: f64, context: String },

    #[error("accuracy target {target:e} not reached: std-error {achieved:e} after {points} points")]
    AccuracyNotReached { target: f64, achieved: f64, points: usize },

    #[error("pinned coordinate {0} has zero variance")]
    ZeroPinnedVariance(usize),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("no simple graph after {0} rewiring attempts")]
    RewireFailed(u64),

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Numerical,
    ResourceCap,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_) | Error::Io(_) | Error::Json(_) => ErrorClass::Usage,
            Error::NotPositiveDefinite { .. }
            | Error::AccuracyNotReached { .. }
            | Error::ZeroPinnedVariance(_)
            | Error::Bisection(_) => ErrorClass::Numerical,
            Error::SizeCap(_) | Error::RewireFailed(_) => ErrorClass::ResourceCap,
        }
    }

    /// Attach context to a positive-definiteness failure.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::NotPositiveDefinite { min_eigenvalue, context } => {
                Error::NotPositiveDefinite { min_eigenvalue, context: format!("{context} {}", ctx.into()) }
            }
            other => other,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
