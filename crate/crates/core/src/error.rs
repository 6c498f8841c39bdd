use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing loss term `{0}`")]
    MissingTerm(String),

    #[error("loss term `{name}` is not finite ({value})")]
    NonFiniteTerm { name: String, value: f64 },

    #[error("no class has ground-truth instances")]
    EmptyEvaluation,

    #[error("scene generation failed: {0}")]
    GenerationFailure(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error, skipping any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Io { .. } => 3,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::InvalidParameter(_)
            | Error::ShapeMismatch(_)
            | Error::MissingTerm(_)
            | Error::NonFiniteTerm { .. }
            | Error::EmptyEvaluation => 2,
            _ => 1,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
