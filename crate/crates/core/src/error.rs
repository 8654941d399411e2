//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced while reading or validating input data.
#[derive(Debug, Error)]
pub enum Error {
    /// A line could not be parsed (column count, bad integers, malformed
    /// feature or MISC syntax). Carries the 1-based line number.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A sentence parsed cleanly but its dependency graph is not a single
    /// rooted tree, or token ids are not contiguous.
    #[error("sentence {sent_id}: {msg}")]
    Structure { sent_id: String, msg: String },

    /// A rule file failed to load (bad JSON, unknown version, duplicate keys).
    #[error("rule file: {0}")]
    RuleFile(String),

    /// Invalid data outside of line-oriented parsing (bad score tables,
    /// unresolved gold-error marks, inconsistent feature mappings).
    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn structure(sent_id: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Structure {
            sent_id: sent_id.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
