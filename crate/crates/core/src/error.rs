use std::path::PathBuf;

use crate::plan::PlanParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("illegal action `{action}`: {reason}")]
    IllegalAction { action: String, reason: String },

    #[error("scenario generation exhausted after {attempts} attempts: {reason}")]
    GenExhausted { attempts: u64, reason: String },

    #[error("no stable completed stack for scenario {0}")]
    NoStableStack(String),

    #[error("catalog for scenario {scenario} is missing prefix [{prefix}]")]
    BrokenCatalog { scenario: String, prefix: String },

    #[error("unknown template {0}")]
    UnknownTemplate(String),

    #[error(transparent)]
    Parse(#[from] PlanParseError),

    #[error("endpoint error: {0}")]
    Endpoint(String),

    #[error("fixture {name} mismatch: {diff}")]
    FixtureMismatch { name: String, diff: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
