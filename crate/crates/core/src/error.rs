use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("{0} did not converge")]
    NoConvergence(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid Kraus set: {0}")]
    InvalidKraus(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("near-defective spectrum (min conditioning {min_conditioning:.3e})")]
    NearDefective { min_conditioning: f64 },
    #[error("metric operator is singular (condition number {condition:.3e})")]
    SingularMetric { condition: f64 },
    #[error("outcome index {index} out of range ({count} outcomes)")]
    InvalidOutcome { index: usize, count: usize },
    #[error("outcome probability {value:.3e} outside [0, 1] beyond tolerance")]
    ProbabilityOutOfRange { value: f64 },
    #[error("signal too short: {got} samples, need at least {need}")]
    SignalTooShort { got: usize, need: usize },
    #[error("model order {order} is not usable: {reason}")]
    ModelOrder { order: usize, reason: String },
    #[error("ill-conditioned problem: {0}")]
    IllConditioned(String),
    #[error("degenerate transition frequencies: {0}")]
    Degenerate(String),
    #[error("no feasible parameter assignment: {0}")]
    NoFeasibleAssignment(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("all model fits diverged")]
    FitDiverged,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoConvergence(_)
            | Error::NearDefective { .. }
            | Error::SingularMetric { .. }
            | Error::ProbabilityOutOfRange { .. }
            | Error::IllConditioned(_)
            | Error::RankDeficient(_)
            | Error::FitDiverged => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e))
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
