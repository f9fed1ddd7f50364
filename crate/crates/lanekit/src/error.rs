use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. Usage errors detected by the argument parser exit
/// with 2.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const MISSING_FRAME: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const MISSING_FIELD: i32 = 6;
    pub const UNDERDETERMINED: i32 = 7;
    pub const IO: i32 = 8;
    pub const SCHEMA_VERSION: i32 = 9;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {field}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{path}:{line}: schema version {found}, expected {expected}")]
    SchemaVersionMismatch {
        path: PathBuf,
        line: usize,
        found: u64,
        expected: u64,
    },
    #[error("{path}:{line}: duplicate frame_id {frame_id:?}")]
    DuplicateFrame {
        path: PathBuf,
        line: usize,
        frame_id: String,
    },
    #[error("prediction frame {0:?} has no ground-truth frame")]
    MissingFrame(String),
    #[error("frame {frame_id:?}: missing {field}")]
    MissingField { frame_id: String, field: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] lanekit_core::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::DuplicateFrame { .. } => exit::PARSE,
            Error::SchemaVersionMismatch { .. } => exit::SCHEMA_VERSION,
            Error::MissingFrame(_) => exit::MISSING_FRAME,
            Error::MissingField { .. } => exit::MISSING_FIELD,
            Error::Config(_) => exit::CONFIG,
            Error::Io { .. } => exit::IO,
            Error::Core(lanekit_core::Error::Underdetermined { .. }) => exit::UNDERDETERMINED,
            Error::Core(lanekit_core::Error::InvalidConfig(_)) => exit::CONFIG,
            Error::Core(_) => exit::OTHER,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
