use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("target unreachable: max correct probability stays below {target} for step sizes up to {limit:e}")]
    TargetUnreachable { target: f64, limit: f64 },

    #[error("condition never met: no trajectory point has max correct probability >= {target}")]
    ConditionNeverMet { target: f64 },

    #[error("empty spectrum: no strictly positive singular value")]
    EmptySpectrum,

    #[error("lower quartile vanishes")]
    LowerQuartileVanishes,

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
