use std::path::PathBuf;

use avgq_core::{LearnError, MdpError, OracleError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid model: {0}")]
    Mdp(#[from] MdpError),
    #[error("oracle failed: {0}")]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("{0}")]
    Config(String),
    #[error("{0} properties failed")]
    PropertiesFailed(usize),
    #[error("target accuracy {epsilon} not reached by {missed} of {seeds} seeds")]
    TargetNotMet {
        epsilon: f64,
        missed: usize,
        seeds: usize,
    },
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration or feasibility problems,
    /// 3 when the oracle does not converge, 4 for a missed target, 1 otherwise
    /// (IO problems and failed properties).
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Oracle(OracleError::NonConvergence { .. }) => 3,
            Self::TargetNotMet { .. } => 4,
            Self::Mdp(_) | Self::Oracle(_) | Self::Learn(_) | Self::Config(_) | Self::Json(_) => 2,
            Self::Io { .. } | Self::Csv(_) | Self::PropertiesFailed(_) => 1,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
