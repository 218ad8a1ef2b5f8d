//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A service rate does not exceed its regime's arrival rate.
    #[error("unstable regime {regime}: service rate {mu} <= arrival rate {lambda}")]
    UnstableRegime { regime: usize, mu: f64, lambda: f64 },

    /// A scalar argument is outside its mathematical domain.
    #[error("domain error for {name}: {message}")]
    Domain { name: &'static str, message: String },

    /// Construction of a domain type violated one of its invariants.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    /// Vector lengths do not match the instance they are applied to.
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// floor((1-gamma)|A|) = 0, so the CVaR tail is empty.
    #[error("degenerate tail fraction: floor((1-gamma)*{n}) = 0 for gamma = {gamma}")]
    DegenerateTail { gamma: f64, n: usize },

    #[error("empty value list for {what}")]
    Empty { what: &'static str },

    /// The continuous subproblem (or a node relaxation) is infeasible.
    #[error("infeasible program: {reason}")]
    Infeasible { reason: String },

    /// Interior-point solve did not reach the requested certificate quality.
    #[error("numerical failure in conic solve: {message}")]
    NumericalFailure { message: String },

    #[error("missing dual multipliers: {what}")]
    MissingDuals { what: &'static str },

    /// Solver-specific preconditions (e.g. the polynomial procedure on a
    /// conflict-free uniform-confidence instance) were not met.
    #[error("method precondition violated: {message}")]
    Precondition { message: String },

    #[error("iteration limit {limit} exceeded")]
    IterationLimit { limit: usize },

    #[error("node limit {limit} exceeded (best gap {gap:.3e})")]
    NodeLimit { limit: usize, gap: f64 },

    /// enumerate_solve refuses instances beyond its size guard.
    #[error("instance too large for enumeration: |A| = {size} > {max}")]
    SizeGuard { size: usize, max: usize },

    #[error("ingest error: {message}")]
    Ingest { message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(name: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            name,
            message: message.into(),
        }
    }

    pub fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub fn ingest(message: impl Into<String>) -> Self {
        Error::Ingest {
            message: message.into(),
        }
    }
}
