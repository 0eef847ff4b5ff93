use std::path::PathBuf;

use repmarket_core::MarketError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: MarketError },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Market(#[from] MarketError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: malformed trace at byte {offset}: {reason}", path.display())]
    Trace { path: PathBuf, offset: u64, reason: String },

    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for anything the user can fix in the input, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Market(MarketError::Invalid { .. } | MarketError::Argument(_) | MarketError::Config(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
