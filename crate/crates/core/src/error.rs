use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module of the crate.
///
/// Variants fall into two groups: malformed input (bad parameters, indices,
/// sizes) and statistical degeneracy (singular information or covariance
/// matrices, zero residual variance). [`Error::is_degenerate`] tells them apart.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("probability {0} outside the admissible range")]
    InvalidProbability(f64),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("forecaster index {index} out of range for {count} forecasters")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate information matrix")]
    DegenerateInformation,

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("degenerate residual variance: {0}")]
    DegenerateVariance(String),

    #[error("integral does not converge: {0}")]
    NonIntegrable(String),
}

impl Error {
    /// True for statistical degeneracy, false for malformed input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateInformation
                | Error::RankDeficient(_)
                | Error::SingularCovariance(_)
                | Error::DegenerateVariance(_)
        )
    }
}
