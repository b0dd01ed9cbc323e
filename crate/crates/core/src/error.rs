use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated an operation's precondition.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("length mismatch: {what} has {actual} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The rejection sampler could not collect enough acceptances; the
    /// envelope is almost certainly far too loose.
    #[error("rejection sampler starved: {accepted} of {requested} accepted after {proposals} proposals (envelope {envelope})")]
    RejectionStarved {
        requested: usize,
        accepted: usize,
        proposals: u64,
        envelope: f64,
    },

    #[error("value {value} exceeds normalization bound {bound}")]
    BoundViolated { value: f64, bound: f64 },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason: reason.into(),
        }
    }

    /// True for precondition failures, as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::LengthMismatch { .. } | Error::ResourceGuard(_)
        )
    }
}
