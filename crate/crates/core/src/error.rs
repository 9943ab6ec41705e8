use thiserror::Error;

/// Errors raised by model construction, propagation and scans.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid piece: {0}")]
    InvalidPiece(String),

    #[error("interval [{lo}, {hi}] exceeds window [{window_lo}, {window_hi}]")]
    WindowViolation {
        lo: f64,
        hi: f64,
        window_lo: f64,
        window_hi: f64,
    },

    #[error("window [{window_lo}, {window_hi}] does not cover [{lo}, {hi}]")]
    WindowCoverage {
        lo: f64,
        hi: f64,
        window_lo: f64,
        window_hi: f64,
    },

    #[error("word of length {len} too short: {needed} symbols required")]
    InsufficientWindow { len: usize, needed: usize },

    #[error("unknown symbol '{0}'")]
    UnknownSymbol(char),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("input is not periodic")]
    NotPeriodic,

    #[error("substitution is not the Fibonacci substitution")]
    NotFibonacci,

    #[error("Weyl disk radius {radius:e} exceeds tolerance {tolerance:e} at truncation {truncation}")]
    TruncationTooShort {
        radius: f64,
        tolerance: f64,
        truncation: f64,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status for the experiment runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::UnknownSymbol(_)
            | Error::InvalidPiece(_)
            | Error::EmptyInput(_)
            | Error::NotFibonacci
            | Error::NotPeriodic
            | Error::Precondition(_)
            | Error::Io(_) => 2,
            Error::NonFinite(_) | Error::TruncationTooShort { .. } => 3,
            Error::WindowViolation { .. }
            | Error::WindowCoverage { .. }
            | Error::InsufficientWindow { .. } => 4,
        }
    }
}
