use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("non-finite value produced by {op}")]
    Numeric { op: &'static str },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    /// True for failures caused by non-finite arithmetic rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. })
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
