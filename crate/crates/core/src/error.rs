//! Error taxonomy. Hypothesis violations are kept distinct from inequality
//! failures and from numerical inconclusiveness; the CLI maps the three
//! classes to different exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fails a structural precondition (not a theorem hypothesis).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A theorem hypothesis is violated; carries the inequality by name so the
    /// caller can report exactly which assumption failed.
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// The weighted decay class contains no nonzero function for the requested
    /// (kappa, D_B): every retained mode has weight exceeding D_B.
    #[error("empty weighted class: min_k exp(kappa*sqrt(max(0,E_k))) = e^{min_log_weight} > D_B = e^{log_d_b}")]
    EmptyWeightedClass { min_log_weight: f64, log_d_b: f64 },

    /// Doubling the node count still changes an integral beyond tolerance.
    #[error("quadrature did not converge: {context} (last delta {last_delta:.3e} > {tol:.3e})")]
    QuadratureNonConvergence {
        context: String,
        last_delta: f64,
        tol: f64,
    },

    /// A verified inequality failed beyond its error budget. The inequalities
    /// checked here are theorems, so this signals a defect, not a refutation.
    #[error("inequality failed beyond error budget: {0}")]
    InequalityFailure(String),

    /// A result exists but its truncation/statistical error bars are too wide
    /// to decide the check.
    #[error("numerically inconclusive: {0}")]
    Inconclusive(String),

    #[error("zero function: {0}")]
    ZeroFunction(String),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class used by the CLI: 1 inequality failure, 2 hypothesis
    /// violation, 3 numerically inconclusive.
    pub fn exit_class(&self) -> i32 {
        match self {
            Error::InequalityFailure(_) => 1,
            Error::HypothesisViolation(_)
            | Error::EmptyWeightedClass { .. }
            | Error::InvalidParameter(_)
            | Error::ZeroFunction(_)
            | Error::Serialization(_) => 2,
            Error::QuadratureNonConvergence { .. } | Error::Inconclusive(_) => 3,
        }
    }
}
