use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Core(#[from] expressivity::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// Outputs were written but a measurement did not converge or training
    /// diverged; the manifest records which.
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 2 config, 3 numeric non-convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use expressivity::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 4,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::DegenerateTrajectory(_) => 2,
                E::NonFinite { .. } | E::Diverged { .. } => 3,
                E::Format { .. } | E::Io(_) | E::Json(_) => 4,
            },
        }
    }
}
