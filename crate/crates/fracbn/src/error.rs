use std::path::PathBuf;

use fracbn_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cannot read config {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("io error on {path}: {source}")]
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

impl RunError {
    /// 2 for bad input, 3 for non-convergence, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) | RunError::ConfigFile { .. } => 2,
            RunError::NonConvergence(_) => 3,
            RunError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::Parameter(_) | CoreError::Config(_) => 2,
                CoreError::Convergence { .. } | CoreError::Projection(_) | CoreError::Tolerance { .. } => 3,
                CoreError::Assembly(_) => 1,
            },
            RunError::Io { .. } | RunError::Csv(_) | RunError::Json(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation_error",
            3 => "non_convergence",
            _ => "error",
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
