use std::fmt;

use thiserror::Error;

/// A single configuration field that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violated field of a rejected configuration, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigReport(pub Vec<Violation>);

impl ConfigReport {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.0.iter().map(|v| v.field)
    }

    pub fn contains(&self, field: &str) -> bool {
        self.0.iter().any(|v| v.field == field)
    }
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(ConfigReport),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step index {got} out of order (expected {expected})")]
    NonMonotoneStep { expected: u64, got: u64 },

    #[error("non-finite value for `{0}`")]
    NonFinite(&'static str),

    #[error("empty archive")]
    EmptyArchive,

    #[error("zero spatial evidence with a positive spatial proportion")]
    ZeroEvidence,

    #[error("inverted interval: lower {lower} > upper {upper}")]
    InvertedInterval { lower: f64, upper: f64 },

    #[error("warmup window has {got} observations, need at least {need}")]
    WarmupTooShort { got: usize, need: usize },

    #[error("warmup window has zero variance")]
    DegenerateVariance,

    #[error("shock windows overlap or fall outside the stream: {0}")]
    InvalidShocks(String),

    #[error("price data: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
