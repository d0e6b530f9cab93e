use std::io;
use std::path::{Path, PathBuf};

use sumreward_core::corpus::CorpusError;
use sumreward_core::embeddings::EmbeddingError;
use sumreward_core::reward::RewardError;
use sumreward_core::rl::RlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad flags or flag combinations.
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Line { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn line(path: &Path, line: usize, message: impl ToString) -> Self {
        Error::Line { path: path.to_path_buf(), line, message: message.to_string() }
    }

    pub fn file(path: &Path, message: impl ToString) -> Self {
        Error::File { path: path.to_path_buf(), message: message.to_string() }
    }

    /// 1 for usage errors, 2 for everything wrong with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
