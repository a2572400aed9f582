use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profiles live on different grids")]
    GridMismatch,

    #[error("weight e^x overflows: right endpoint {right_end} exceeds the cap {cap}")]
    DomainTruncation { right_end: f64, cap: f64 },

    #[error("linear solve failed: relative residual {residual:e} exceeds {tolerance:e}")]
    SolverFailure { residual: f64, tolerance: f64 },

    #[error("backtracking exhausted after {backtracks} reductions at iteration {iter} (alpha1 = {alpha1:e})")]
    BacktrackFailure {
        iter: usize,
        backtracks: usize,
        alpha1: f64,
    },

    #[error("newton iteration did not converge at t = {time} (residual {residual:e} after {iterations} iterations)")]
    NewtonFailure {
        time: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("bracket lost: J({c_lo}) = {j_lo:e} and J({c_hi}) = {j_hi:e} have the same sign")]
    BracketLost {
        c_lo: f64,
        j_lo: f64,
        c_hi: f64,
        j_hi: f64,
    },

    #[error("invalid configuration: `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("payload holds {found} bytes, header promises {expected}")]
    LengthMismatch { found: usize, expected: usize },

    #[error("corrupted payload: {0}")]
    Corrupted(String),

    #[error("malformed header: {0}")]
    Header(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::Validation { .. }
                | Error::Parse { .. }
                | Error::GridMismatch
                | Error::Checkpoint(_)
        )
    }
}
