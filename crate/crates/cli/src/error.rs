use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: line {line}: {message}", path.display())]
    Format { path: PathBuf, line: u64, message: String },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("sample {0} is missing from the groups file")]
    MissingSample(String),
    #[error(transparent)]
    Core(#[from] anticooc_core::Error),
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage errors, 2 for data and I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Core(anticooc_core::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}
