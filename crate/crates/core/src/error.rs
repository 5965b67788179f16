use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("infeasible parameters: {reason} (discriminant {discriminant:.6e})")]
    Infeasible { reason: String, discriminant: f64 },

    #[error("calibration failed for {condition}: best residual mean {mean_residual:.4}, sd {sd_residual:.4}")]
    CalibrationFailure { condition: String, mean_residual: f64, sd_residual: f64 },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
