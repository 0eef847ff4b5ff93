use thiserror::Error;

/// Errors raised by the market engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    /// A field failed validation. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// Every seller has zero rating-weighted transactions.
    #[error("degenerate market: total rating-weighted transactions is zero")]
    DegenerateMarket,

    /// An argument lies outside the domain of the function.
    #[error("argument out of domain: {0}")]
    Argument(String),

    /// An iterative procedure exceeded its iteration guard.
    #[error("{algorithm} did not terminate within {limit} iterations")]
    NonTermination { algorithm: &'static str, limit: u64 },

    #[error("config error: {0}")]
    Config(String),
}

impl MarketError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        MarketError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;
