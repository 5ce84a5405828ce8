use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate axis {axis}: all fitted values are identical")]
    DegenerateAxis { axis: &'static str },

    #[error("unsupported version {found} (this build reads up to version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("corrupt file {path} at byte offset {offset}: {reason}")]
    Corrupt {
        path: PathBuf,
        offset: u64,
        reason: String,
    },

    #[error("non-finite loss in {phase} phase at epoch {epoch}{}", checkpoint_note(.checkpoint))]
    NonFiniteLoss {
        phase: &'static str,
        epoch: usize,
        checkpoint: Option<PathBuf>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

fn checkpoint_note(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" (diagnostic checkpoint written to {})", p.display()),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's inputs rather than by the pipeline itself.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
