use std::path::PathBuf;

use thiserror::Error;

use crate::id::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("identifier width mismatch: {left} bits vs {right} bits")]
    WidthMismatch { left: u8, right: u8 },

    #[error("node {0} cannot be placed in its own routing table")]
    SelfBucket(NodeId),

    #[error("candidate list is empty")]
    NoCandidates,

    #[error("dataset {path}: {message}")]
    Dataset { path: String, message: String },

    #[error("workload error: {0}")]
    Workload(String),

    #[error("learner error: {0}")]
    Learner(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dataset(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Dataset {
            path: path.into(),
            message: message.into(),
        }
    }
}
