use thiserror::Error;

/// Errors raised by constructions and samplers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("size cap exceeded ({0} edges)")]
    SizeCapExceeded(usize),
    #[error("maximum attempts exceeded after {attempts} tries (acceptance rate {rate:.3e})")]
    MaxAttemptsExceeded { attempts: usize, rate: f64 },
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("offspring pair is not critical: m◦m• = {0}")]
    NonCriticalPair(f64),
    #[error("tail not certifiable: {0}")]
    TailNotCertifiable(String),
    #[error("perimeter mismatch: loop of length {expected}, piece of perimeter {found}")]
    PerimeterMismatch { expected: usize, found: usize },
    #[error("piece for black vertex {0} does not have a simple boundary")]
    NonSimplePiece(usize),
    #[error("malformed looptree: {0}")]
    MalformedLooptree(String),
    #[error("successor of corner {0} unresolved inside the window")]
    UnresolvedSuccessor(i64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
