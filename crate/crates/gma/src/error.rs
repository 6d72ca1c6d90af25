use std::path::PathBuf;

/// Failures of the std-side front end. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum GmaError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error("{}: at `{location}`: {message}", file.display())]
    Json {
        file: PathBuf,
        location: String,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] gma_core::Error),
    #[error("{0}")]
    Usage(String),
    /// A check ran to completion but its numbers were out of tolerance.
    #[error("{0}")]
    CheckFailed(String),
}

impl GmaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GmaError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for numeric failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            GmaError::Core(e) if e.is_numeric() => 2,
            GmaError::CheckFailed(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = GmaError> = std::result::Result<T, E>;
