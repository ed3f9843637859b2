use thiserror::Error;

/// Errors produced by model construction, simulation and the control solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced a NaN or infinite state.
    #[error("integration produced a non-finite state at t = {time}")]
    NonFinite { time: f64 },

    /// The multiplier makes the square-root discriminant negative somewhere on the orbit.
    #[error("lambda0 = {lambda0} is infeasible: discriminant negative at theta = {theta}")]
    InfeasibleMultiplier { lambda0: f64, theta: f64 },

    /// The requested target cannot be reached under the given bound.
    #[error("infeasible: {reason} (achievable range [{lower}, {upper}])")]
    Infeasible {
        reason: String,
        lower: f64,
        upper: f64,
    },

    /// A combinatorial search ran out of candidates.
    #[error("search exhausted: {0}")]
    SearchExhausted(String),

    /// An iterative numeric routine did not converge or hit a singular case.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("all models in an ensemble must share the same kind")]
    MixedKinds,
}

impl Error {
    /// True for errors that mean "no admissible control exists" rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Infeasible { .. } | Error::InfeasibleMultiplier { .. } | Error::SearchExhausted(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
