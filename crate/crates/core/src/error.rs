use thiserror::Error;

/// Errors raised by operators, solvers and samplers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A non-finite value appeared; `iterate` holds the offending iterate.
    #[error("numerical failure in {context} at iteration {iteration}")]
    Numerical {
        context: &'static str,
        iteration: usize,
        iterate: Vec<f64>,
    },

    /// The assumptions of a bound or rate are not met (for instance a contraction rate >= 1).
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A chain failed; carries the state it failed from.
    #[error("chain failed at step {step}: {source}")]
    Chain {
        step: usize,
        theta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
