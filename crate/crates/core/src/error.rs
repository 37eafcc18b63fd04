use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("state error: {0}")]
    State(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("infeasible band: {0}")]
    InfeasibleBand(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("compatibility error: {0}")]
    Compatibility(String),

    #[error("invalid check: {0}")]
    InvalidCheck(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Format(_) => "E_FORMAT",
            Error::Validation(_) => "E_VALIDATION",
            Error::Consistency(_) => "E_CONSISTENCY",
            Error::Range(_) => "E_RANGE",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Shape(_) => "E_SHAPE",
            Error::State(_) => "E_STATE",
            Error::Numeric(_) => "E_NUMERIC",
            Error::Label(_) => "E_LABEL",
            Error::Config(_) => "E_CONFIG",
            Error::InfeasibleBand(_) => "E_INFEASIBLE_BAND",
            Error::Training(_) => "E_TRAINING",
            Error::Compatibility(_) => "E_COMPAT",
            Error::InvalidCheck(_) => "E_INVALID_CHECK",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
        }
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => { $crate::error::Error::Shape(format!($($arg)*)) };
}
pub(crate) use shape_err;
