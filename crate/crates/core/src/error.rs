use alloc::string::String;

/// Errors produced by the constructions in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A measure (or other value) broke one of its invariants.
    #[error("validation failed ({invariant}): {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },

    /// A caller-supplied parameter is out of range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (singular system, no convergence, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The construction cannot proceed on this input, e.g. an atom is too heavy
    /// for the separated-subset argument.
    #[error("construction failed: {0}")]
    Construction(String),

    /// The measure is outside the class the constructions handle.
    #[error("unsupported measure: {0}")]
    Unsupported(String),

    /// A best-effort construction ran to completion without reaching tolerance.
    #[error("best-effort construction stopped at residual {residual:e} (tolerance {tolerance:e})")]
    BestEffort { residual: f64, tolerance: f64 },

    /// Reference integration could not reach the requested accuracy.
    #[error("reference integration error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Precision { estimate: f64, tolerance: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}

pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::Validation {
        invariant,
        detail: detail.into(),
    }
}
