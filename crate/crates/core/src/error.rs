use core::fmt;

/// Errors raised by the numeric and control layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument was outside its valid domain (non-positive `dt`, NaN input, ...).
    InvalidArgument(&'static str),
    /// A calibration table is empty, unsorted or missing its zero anchor.
    InvalidTable(&'static str),
    /// The plant refused a command while a calibration sweep was running.
    CalibrationAborted(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidTable(msg) => write!(f, "invalid calibration table: {msg}"),
            Error::CalibrationAborted(msg) => write!(f, "calibration aborted: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn ensure_positive(value: f64, what: &'static str) -> Result<(), Error> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(what))
    }
}

pub(crate) fn ensure_finite(value: f64, what: &'static str) -> Result<(), Error> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(what))
    }
}
