//! Error type shared by the symbolic and numeric layers.

use std::fmt;

/// Failure modes of the exact calculus and the bounds pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An integral against the weight `s^a log^p s` diverges (effective
    /// exponent <= -1 at the origin).
    NonIntegrable { exponent: i64, log_power: u32 },
    /// Numeric evaluation outside the expression's domain (r <= 0 for an
    /// expression unbounded at the origin, negative radius, ...).
    DomainError(String),
    /// A hierarchy stage was requested before its prerequisites exist.
    MissingOrder { wanted: usize, have: usize },
    /// A field expected to be independent of r has a radially varying mode.
    NotThetaField,
    /// Internal consistency failure: an assembled solution field is
    /// unbounded at the origin.
    OriginUnbounded(String),
    /// Internal consistency failure: an assembled solution violates its
    /// boundary closure identities.
    BoundaryMismatch(String),
    /// Scheme parameters outside their admissible ranges.
    InvalidParams(String),
    /// The perturbation size exceeds the admissible threshold.
    MuTooLarge { mu: f64, mu0: f64 },
    /// Malformed configuration or serialized document.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonIntegrable { exponent, log_power } => write!(
                f,
                "non-integrable term s^{exponent} log^{log_power}(s) at the origin"
            ),
            Error::DomainError(msg) => write!(f, "domain error: {msg}"),
            Error::MissingOrder { wanted, have } => {
                write!(f, "order {wanted} requested but only {have} computed")
            }
            Error::NotThetaField => write!(f, "field is not radially constant"),
            Error::OriginUnbounded(what) => {
                write!(f, "assembled field unbounded at origin: {what}")
            }
            Error::BoundaryMismatch(what) => write!(f, "boundary closure violated: {what}"),
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Error::MuTooLarge { mu, mu0 } => {
                write!(f, "mu = {mu} exceeds admissible threshold mu0 = {mu0}")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
