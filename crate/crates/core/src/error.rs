use thiserror::Error;

/// Failures raised by the model, integrators and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Squared vehicle separation fell below the singularity guard.
    #[error("separation too small: d^2 = {separation_sq:e}{}", step_suffix(*step))]
    SeparationTooSmall {
        separation_sq: f64,
        step: Option<usize>,
    },

    /// A Runge-Kutta stage produced a non-finite value.
    #[error("non-finite Runge-Kutta stage at t = {t}")]
    NonFiniteStage { t: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    /// Two trajectories (or a trajectory and a grid) disagree on their nodes.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid scenario: {}", .0.join("; "))]
    ScenarioInvalid(Vec<String>),

    #[error("invalid solver options: {}", .0.join("; "))]
    OptionsInvalid(Vec<String>),

    /// The line search could not decrease the objective at the minimum step.
    #[error("line search stalled after {iterations} iterations")]
    Stalled { iterations: usize },

    #[error("Gauss-Newton normal equations are singular and the gradient fallback failed")]
    SingularJacobian,
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
