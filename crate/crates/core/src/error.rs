use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("non-positive propensity {value} for observed pair ({user}, {item})")]
    DivisionHazard {
        user: usize,
        item: usize,
        value: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("degenerate rating prior: P(R={rating}) is zero in the reference data")]
    DegeneratePrior { rating: u8 },

    #[error("training diverged at epoch {epoch} (objective {objective})")]
    TrainingDiverged { epoch: usize, objective: f64 },

    #[error("pseudo-labeled set is empty at iteration {iteration}; widen epsilon")]
    EmptyPseudoSet { iteration: usize },

    #[error("loss does not satisfy the triangle inequality")]
    InvalidLoss,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn empty(msg: impl Into<String>) -> Self {
        Error::EmptyData(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure is numerical (divergence, division hazard) rather
    /// than a problem with the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TrainingDiverged { .. }
                | Error::DivisionHazard { .. }
                | Error::EmptyPseudoSet { .. }
        )
    }

    /// Whether the failure comes from reading or validating data files.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io { .. }
                | Error::EmptyData(_)
                | Error::DegeneratePrior { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
