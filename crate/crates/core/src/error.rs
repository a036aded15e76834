use std::path::PathBuf;

use thiserror::Error;

use crate::losses::LossBreakdown;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A zero-norm (or non-finite) vector reached a cosine or angular computation.
    #[error("degenerate vector: {0}")]
    DegenerateVector(&'static str),

    /// A caller broke an operation's preconditions (shapes, ranges, lengths).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Hard or random negative selection needs at least two batch items.
    #[error("mining impossible: batch of {0} item(s), need at least 2")]
    MiningImpossible(usize),

    /// Malformed or inconsistent catalog/annotation input.
    #[error("ingestion error at {location}: {message}")]
    Ingestion { location: String, message: String },

    /// An id that should exist does not.
    #[error("lookup error: unknown id {0:?}")]
    Lookup(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A training step produced a non-finite loss.
    #[error("training diverged at step {step}: {breakdown:?}")]
    Divergence { step: usize, breakdown: LossBreakdown },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn ingestion(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            location: location.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
