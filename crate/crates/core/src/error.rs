use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the core library. Most of them are contract violations
/// by the caller (mismatched lengths, empty inputs); `Parse` covers the text
/// forms of conditions, strategies, problems and configuration keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    EmptyCandidates,
    EnumerationTooLarge {
        bits: usize,
        limit: usize,
    },
    TooManySamples {
        requested: usize,
        available: u64,
    },
    InvalidParameter {
        name: &'static str,
        reason: String,
    },
    EmptySplit {
        train: usize,
        test: usize,
    },
    MismatchedGrids,
    /// The problem needs data that has to be loaded from a file first.
    ExternalData(String),
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::EmptyCandidates => f.write_str("selection called with no candidates"),
            Error::EnumerationTooLarge { bits, limit } => {
                write!(f, "refusing to enumerate 2^{bits} rows (limit is {limit} bits); sample the problem instead")
            }
            Error::TooManySamples { requested, available } => {
                write!(f, "requested {requested} distinct samples but only {available} exist")
            }
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::EmptySplit { train, test } => {
                write!(f, "split leaves an empty partition (train {train}, test {test})")
            }
            Error::MismatchedGrids => f.write_str("runs do not share the same measurement steps"),
            Error::ExternalData(what) => write!(f, "problem requires external data: {what}"),
            Error::Parse(msg) => f.write_str(msg),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
