use thiserror::Error;

use crate::metric::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input is not a candidate metric at all (shape, sign, finiteness).
    #[error("structural error: {0}")]
    Structural(String),

    /// The input is well formed but violates one or more metric axioms.
    #[error("metric axioms violated: {0}")]
    Axiom(Box<ValidationReport>),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("need at least {needed} points, found {found}")]
    TooFewPoints { needed: usize, found: usize },

    /// A hypothesis of a transfer or bound failed on concrete witness indices.
    #[error("precondition failed: {reason} (witness {witness:?})")]
    Precondition { reason: String, witness: Vec<usize> },

    /// Openness transfer refused: the perturbation is outside the radius.
    #[error("W_d = {measured} is not below the required radius {required}")]
    OutsideRadius { measured: f64, required: f64 },

    /// A numerically checked inequality that should hold did not.
    #[error("internal assertion failed: {what}: {value} exceeds {bound} (witness {witness:?})")]
    Assertion {
        what: &'static str,
        value: f64,
        bound: f64,
        witness: Vec<usize>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of checked inequalities, as opposed to bad input.
    pub fn is_assertion(&self) -> bool {
        matches!(self, Error::Assertion { .. })
    }
}
