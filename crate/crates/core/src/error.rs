use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cache configuration: {0}")]
    InvalidConfig(String),

    #[error("splitting point k = {k} outside [0, {n}]")]
    SplitOutOfRange { k: u32, n: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("address {address:#x} outside {bits}-bit address space")]
    AddressOutOfRange { address: u64, bits: u32 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("{path}:{line}: {msg}")]
    TraceParse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid parameter file: {0}")]
    Params(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
