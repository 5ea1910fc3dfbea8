use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The correlation matrix (after the nugget) failed to factor.
    #[error("matrix is not positive definite (pivot {pivot}); try a larger nugget")]
    NotPositiveDefinite { pivot: usize },

    /// A rank-one extension produced a nonpositive pivot.
    #[error("cholesky extension broke down (pivot {0:e}); the new point duplicates the design")]
    Breakdown(f64),

    /// Predictive variance at a candidate is at or below the rejection tolerance.
    #[error("candidate rejected: variance {0:e} at or below tolerance")]
    CandidateRejected(f64),

    #[error("no unused candidates remain")]
    NoCandidates,

    #[error("block subsample is empty")]
    EmptySubsample,

    #[error("{failed} of {total} bootstrap fits failed")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("path generator exceeded {0} rejection attempts")]
    RejectionLimit(usize),

    #[error("covariance factorization failed after jitter escalation")]
    Factorization,
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Whether the failure is numerical (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Breakdown(_)
                | Error::CandidateRejected(_)
                | Error::BootstrapFailed { .. }
                | Error::Factorization
        )
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
