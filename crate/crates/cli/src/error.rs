use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Calibration(String),

    #[error("missing input files: {}", .0.join(", "))]
    MissingInput(Vec<String>),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 0 success, 1 usage, 2 I/O, 3 parse, 4 calibration, 5 missing input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Parse(_) => 3,
            CliError::Calibration(_) => 4,
            CliError::MissingInput(_) => 5,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<acflab::Error> for CliError {
    fn from(e: acflab::Error) -> Self {
        match e {
            acflab::Error::Parse(_) => CliError::Parse(e.to_string()),
            acflab::Error::CalibrationFailure { .. } => CliError::Calibration(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}
