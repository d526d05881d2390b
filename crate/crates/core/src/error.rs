use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition of an operation was violated (shape, range, finiteness).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("vocabulary error: {0}")]
    Vocab(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("search space of {size} sequences exceeds the limit of {limit}")]
    SearchSpace { size: u128, limit: u128 },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
