use thiserror::Error;

/// Errors produced by the models, solvers and training loop.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate population: compartment total is zero")]
    DegeneratePopulation,

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget { max_steps: usize, t: f64 },

    #[error("non-finite derivative at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("adjoint integration became unstable at t = {t}; try a tighter rtol")]
    AdjointInstability { t: f64 },

    #[error("malformed model data: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
