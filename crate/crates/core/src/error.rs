//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulators, likelihood evaluations and samplers.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state vector contained a negative component where only
    /// non-negative values are valid.
    #[error("negative state component x[{index}] = {value}")]
    NegativeState { index: usize, value: f64 },

    /// A hazard evaluated to NaN or infinity.
    #[error("non-finite hazard for reaction {reaction} at t = {t}")]
    NonFiniteHazard { reaction: usize, t: f64 },

    /// The total hazard exceeded the dominating rate used by the
    /// thinning sampler; the registered upper bound is wrong.
    #[error("thinning bound violated at t = {t}: total hazard {total} > bound {bound}")]
    ThinningBoundViolated { t: f64, total: f64, bound: f64 },

    /// The per-interval event budget was exhausted before reaching the
    /// end of the interval.
    #[error("event budget of {budget} exhausted at t = {t}")]
    EventBudgetExceeded { t: f64, budget: u64 },

    /// Cholesky factorization failed even after jitter escalation.
    #[error("Cholesky factorization failed in {context}")]
    CholeskyFailed { context: &'static str },

    /// The adaptive ODE integrator drove the step size below the
    /// representable minimum (stiff blow-up).
    #[error("ODE step size underflow at t = {t}")]
    OdeStepUnderflow { t: f64 },

    /// The ODE integrator exceeded its step budget.
    #[error("ODE integrator exceeded {max_steps} steps at t = {t}")]
    OdeMaxSteps { t: f64, max_steps: usize },

    /// A simulated state became NaN or infinite.
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    /// Every particle in the filter carries zero weight.
    #[error("all particle weights are zero")]
    AllWeightsZero,

    /// Mis-specified inputs (dimension mismatches, empty data, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
