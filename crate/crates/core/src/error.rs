use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad arguments or configuration supplied by the caller.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An operation was called outside its domain.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed input file. `line` is 1-based; `column` names the field when known.
    #[error("{}:{line}{}: {message}", path.display(), column.as_ref().map(|c| format!(" (column {c})")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: u64,
        column: Option<String>,
        message: String,
    },

    #[error("{}: file is empty", path.display())]
    EmptyFile { path: PathBuf },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by user input rather than by the program or
    /// its environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Invalid(_)
            | Error::Precondition(_)
            | Error::Parse { .. }
            | Error::EmptyFile { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Internal(_) => false,
        }
    }
}
