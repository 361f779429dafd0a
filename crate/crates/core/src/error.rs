use std::path::PathBuf;

/// Errors surfaced by the planning pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid primitive parameters: {0}")]
    InvalidParams(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u16,
        expected: u16,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("mask cache was built for a different flow model (cache {cache}, model {model})")]
    ChecksumMismatch { cache: String, model: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
