//! Error type shared by the numeric core.

use std::fmt;

/// Errors surfaced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Tensor shapes do not conform to an op's arity/broadcast rules.
    ShapeMismatch { op: &'static str, detail: String },
    /// A numeric operation produced NaN/Inf.
    NonFinite { op: &'static str, detail: String },
    /// An argument violated a precondition.
    InvalidArgument { arg: &'static str, detail: String },
    /// A linear system could not be solved.
    SingularSystem { detail: String },
    /// An iterative solver failed in a way the caller cannot recover from.
    SolverFailure { detail: String },
    /// Serialization or file-format problem.
    Format { detail: String },
    /// Underlying I/O failure.
    Io { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => write!(f, "shape mismatch in {op}: {detail}"),
            Error::NonFinite { op, detail } => write!(f, "non-finite value in {op}: {detail}"),
            Error::InvalidArgument { arg, detail } => write!(f, "invalid argument {arg}: {detail}"),
            Error::SingularSystem { detail } => write!(f, "singular linear system: {detail}"),
            Error::SolverFailure { detail } => write!(f, "solver failure: {detail}"),
            Error::Format { detail } => write!(f, "format error: {detail}"),
            Error::Io { detail } => write!(f, "io error: {detail}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io { detail: e.to_string() }
    }
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
