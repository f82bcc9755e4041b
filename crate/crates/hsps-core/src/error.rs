//! Crate-wide error type.

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A quantity fell outside the range a model or table is valid for.
    #[error("{quantity} = {value} outside valid range [{min}, {max}] {unit}")]
    OutOfRange {
        quantity: String,
        value: f64,
        min: f64,
        max: f64,
        unit: &'static str,
    },

    /// Input violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// No sign change of the phase mismatch on the search interval.
    #[error(
        "no phasematch on [{lo}, {hi}] um: delta_k endpoints {dk_lo:.6e} and {dk_hi:.6e} rad/um"
    )]
    NoPhasematch {
        lo: f64,
        hi: f64,
        dk_lo: f64,
        dk_hi: f64,
    },

    /// Truncated pair-number distribution left too much tail mass.
    #[error(
        "pair-number tail mass {tail:.3e} at n_max = {n_max} exceeds {limit:.0e}; raise n_max"
    )]
    Truncation { n_max: usize, tail: f64, limit: f64 },

    /// Offset calibration could not reproduce the requested peak.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// A count-rate estimator was requested on data that cannot define it.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A structured text file could not be parsed.
    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    /// Invalid configuration of a model or operation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn out_of_range(
        quantity: impl Into<String>,
        value: f64,
        range: (f64, f64),
        unit: &'static str,
    ) -> Self {
        Error::OutOfRange {
            quantity: quantity.into(),
            value,
            min: range.0,
            max: range.1,
            unit,
        }
    }
}
