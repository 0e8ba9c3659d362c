//! Crate-wide error type.

use std::fmt;

/// Errors raised by schedule evaluation, bridge algebra, model execution,
/// training, and file I/O.
#[derive(Debug)]
pub enum BridgeError {
    /// An input fell outside the mathematical domain of an operation
    /// (e.g. a time outside `[0, t_max]`).
    Domain(String),
    /// An argument violated a structural precondition (shape mismatch,
    /// zero count, out-of-range metric value).
    Argument(String),
    /// A bridge coefficient needed in a denominator is zero; happens only
    /// at the endpoints where `c_t = 0`.
    SingularCoefficient { t: f64 },
    /// A computation produced a non-finite value at the given step.
    Divergence { step: usize, what: String },
    /// `backward` was called with an activation trace recorded against an
    /// older parameter vector.
    StaleTrace,
    /// Underlying file I/O failure.
    Io(std::io::Error),
    /// A file could not be parsed; `offset` is the byte position of the
    /// first offending byte.
    Parse { offset: usize, what: String },
}

impl fmt::Display for BridgeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Domain(what) => write!(f, "domain error: {what}"),
            Self::Argument(what) => write!(f, "argument error: {what}"),
            Self::SingularCoefficient { t } => {
                write!(f, "singular bridge coefficient c = 0 at t = {t}")
            }
            Self::Divergence { step, what } => {
                write!(f, "numerical divergence at step {step}: {what}")
            }
            Self::StaleTrace => write!(f, "activation trace is stale: parameters changed since forward"),
            Self::Io(err) => write!(f, "i/o error: {err}"),
            Self::Parse { offset, what } => write!(f, "parse error at byte {offset}: {what}"),
        }
    }
}

impl std::error::Error for BridgeError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for BridgeError {
    fn from(err: std::io::Error) -> Self {
        Self::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, BridgeError>;
