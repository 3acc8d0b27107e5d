use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A comparison could not be separated within the configured cap. For
    /// random points this is a measure-zero event or a cap that is too small.
    #[error("precision exhausted deciding {what} at position {position} (cap {cap})")]
    PrecisionExhausted {
        what: &'static str,
        position: u64,
        cap: usize,
    },

    #[error("no hit found up to scan horizon {horizon} (last term {last_term}, {emitted} terms emitted)")]
    ScanLimit {
        horizon: u64,
        last_term: u64,
        emitted: usize,
    },

    #[error("incompatible combination: {0}")]
    Incompatible(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("insufficient terms: need {needed}, have {have}")]
    InsufficientTerms { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for precision and scan exhaustion, the two "ran out of budget" outcomes.
    pub fn is_exhaustion(&self) -> bool {
        matches!(
            self,
            Error::PrecisionExhausted { .. } | Error::ScanLimit { .. }
        )
    }
}
