use std::path::PathBuf;

use kbh_core::KbhError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Estimation(#[from] KbhError),

    #[error("{failed} of {total} estimator runs failed (limit 10%)")]
    FailureRate { failed: usize, total: usize },
}

impl HarnessError {
    /// 1 for usage and input errors, 2 for numerical failures, 3 when a
    /// campaign exceeded its failure budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Parse { .. } | HarnessError::Io { .. } => 1,
            HarnessError::Estimation(
                KbhError::InvalidParameter(_) | KbhError::DimensionMismatch { .. },
            ) => 1,
            HarnessError::Estimation(_) => 2,
            HarnessError::FailureRate { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        HarnessError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
