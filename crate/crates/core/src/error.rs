use thiserror::Error;

/// Errors raised by the spectral, sampling and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}: only d = 1 and d = 2 are supported")]
    UnsupportedDimension(usize),
    #[error("modes per dimension must be even and at least 4, got {0}")]
    InvalidModeCount(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("expected a field with {expected} component(s), got {found}")]
    ComponentMismatch { expected: usize, found: usize },
    #[error("symbol is not Hermitian at wavevector {0:?}")]
    NonHermitianSymbol([i64; 2]),
    #[error("symbol must be real and strictly negative (offending wavevector {0:?})")]
    NonNegativeSymbol([i64; 2]),
    #[error("vorticity must have zero mean, found mean {0:e}")]
    NonZeroMean(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("problem is not dissipative: mode {0:?} is undamped but forced")]
    NonDissipative([i64; 2]),
    #[error("time points must be strictly increasing and non-negative")]
    UnsortedTimes,
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no certificate: {0}")]
    NoCertificate(String),
    #[error("certificate fails on states ({x}, {y}): contraction {measured} exceeds alpha {alpha}")]
    CertificateViolated { x: usize, y: usize, measured: f64, alpha: f64 },
    #[error("malformed ensemble file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
