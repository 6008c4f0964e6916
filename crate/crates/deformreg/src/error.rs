use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}:{line}: expected landmark index {expected}, found {found}")]
    NonContiguousIndex {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: String,
    },
    #[error("{path}: not a DVF1 file")]
    BadMagic { path: PathBuf },
    #[error("{path}: payload has {got} bytes, expected {expected}")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        got: u64,
    },
    #[error("{path}: unsupported image format ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("{path}: cannot decode image: {detail}")]
    DecodeFailure { path: PathBuf, detail: String },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: deformreg_core::Error,
    },
    #[error("matcher failed: {0}")]
    Matcher(String),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn core(context: impl Into<String>, source: deformreg_core::Error) -> Self {
        Self::Core {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 matcher.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Matcher(_)
            | Self::Core {
                source: deformreg_core::Error::MatcherUnavailable,
                ..
            } => 3,
            Self::Core {
                source: deformreg_core::Error::InvalidConfig(_),
                ..
            } => 1,
            _ => 2,
        }
    }
}
