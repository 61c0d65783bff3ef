use std::path::PathBuf;

use crate::backend::BackendError;

/// Process exit codes. Stable contract for scripts driving the CLI.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const BACKEND: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] coevo_core::Error),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A record in a line-oriented file failed to parse or validate.
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint integrity error: {0}")]
    Integrity(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use coevo_core::Error as C;
        match self {
            Error::Core(C::Config { .. } | C::Domain(_)) | Error::Config(_) => exit::CONFIG,
            Error::Core(C::Data(_) | C::EmptyCurriculum)
            | Error::Record { .. }
            | Error::Integrity(_) => exit::DATA,
            Error::Io { .. } => exit::DATA,
            Error::Core(C::JudgeProtocol(_)) => exit::BACKEND,
            Error::Backend(b) if b.is_data_error() => exit::DATA,
            Error::Backend(_) => exit::BACKEND,
            Error::Core(C::Optimizer { .. }) => exit::FAILURE,
        }
    }
}
