use std::fmt;

/// Error taxonomy shared across the workspace.
///
/// The CLI maps these onto process exit codes: domain/consistency/parse and
/// geometry problems exit 1, capacity refusals exit 2, and experiments that
/// cannot produce enough rare events for a fit exit 3.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A single parameter is outside its allowed range.
    RejectDomain(String),
    /// Parameters are individually fine but mutually inconsistent.
    RejectInconsistent(String),
    /// The request would exceed a hard size/work budget.
    Capacity(String),
    /// A geometric precondition fails (e.g. the sampled region does not
    /// strictly contain the box being measured).
    Geometry(String),
    /// A numeric inversion target is outside the attainable range.
    OutOfRange(String),
    /// Too few positive outcomes survive to fit a scaling law.
    InsufficientEvents(String),
    /// Config-file syntax error, with 1-based line number.
    Parse { line: usize, msg: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::RejectDomain(m) => write!(f, "domain error: {m}"),
            Error::RejectInconsistent(m) => write!(f, "inconsistent parameters: {m}"),
            Error::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            Error::Geometry(m) => write!(f, "geometry error: {m}"),
            Error::OutOfRange(m) => write!(f, "out of range: {m}"),
            Error::InsufficientEvents(m) => write!(f, "insufficient events: {m}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
