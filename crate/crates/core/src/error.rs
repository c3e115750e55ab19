use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A protocol (or config) text line could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A binary file violates its format. `record` is the zero-based record
    /// index when the problem is inside the record section.
    #[error("format error{}: {message}", record.map(|r| format!(" at record {r}")).unwrap_or_default())]
    Format {
        record: Option<u64>,
        message: String,
    },

    /// Joining embeddings with labels failed; `offenders` lists the utterance ids.
    #[error("assembly error: {message}: {}", offenders.join(", "))]
    Assembly {
        message: String,
        offenders: Vec<String>,
    },

    /// The caller asked for something the contract does not allow.
    #[error("usage error: {0}")]
    Usage(String),

    /// A run could not produce any result (e.g. every grid cell failed).
    #[error("run error: {0}")]
    Run(String),

    #[error("no such input: {}", path.display())]
    MissingInput { path: PathBuf },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn format(record: Option<u64>, msg: impl Into<String>) -> Self {
        Error::Format {
            record,
            message: msg.into(),
        }
    }

    /// Exit code used by the command line tool: 2 usage, 3 data/format, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::MissingInput { .. } => 2,
            Error::Parse { .. } | Error::Format { .. } | Error::Assembly { .. } => 3,
            Error::Run(_) | Error::Io(_) => 4,
        }
    }
}
