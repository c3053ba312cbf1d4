use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite logits")]
    NonFiniteLogits,

    #[error("degenerate prediction vector")]
    DegenerateVector,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("noise_rate out of range: {0} (expected 0 < rate <= 0.95)")]
    NoiseRate(f64),

    #[error("empty training subset")]
    EmptySubset,

    #[error("degenerate score distribution")]
    DegenerateScores,

    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("q-table supports k ≤ 10 (got k = {0})")]
    UnsupportedMethodCount(usize),

    #[error("unsupported alpha {0}; expected 0.05 or 0.10")]
    UnsupportedAlpha(f64),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than by a
    /// numerical failure during a run.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLogits | Error::DegenerateVector | Error::DegenerateScores
        )
    }
}
