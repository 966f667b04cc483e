//! Error type shared by all modules.

use core::fmt;

/// Failure modes of the numerical operations.
///
/// `Domain` marks evaluation points outside an operation's domain (poles,
/// branch points, spectrum of the wrong type). `Invalid` marks inputs that
/// violate a documented invariant of the data types. `Accuracy` is returned
/// when an adaptive scheme cannot reach its target tolerance; the achieved
/// estimate is reported so callers can decide whether to accept the value.
/// `Precision` is reserved for the inverse spectral transform when the
/// requested reconstruction exceeds the arithmetic's conditioning budget.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    Domain(&'static str),
    Invalid(&'static str),
    NotRepresentable(&'static str),
    Unsupported(&'static str),
    Accuracy {
        context: &'static str,
        target: f64,
        achieved: f64,
    },
    Precision(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(s) => write!(f, "domain error: {s}"),
            Error::Invalid(s) => write!(f, "invalid input: {s}"),
            Error::NotRepresentable(s) => write!(f, "not representable: {s}"),
            Error::Unsupported(s) => write!(f, "unsupported: {s}"),
            Error::Accuracy {
                context,
                target,
                achieved,
            } => write!(
                f,
                "accuracy error in {context}: requested {target:.3e}, achieved {achieved:.3e}"
            ),
            Error::Precision(s) => write!(f, "precision error: {s}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
