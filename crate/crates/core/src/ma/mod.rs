//! Monge-Ampere solvers: the twisted equation, the Calabi equation, the continuity path and
//! the comparison/monotonicity checks.

mod checks;
mod continuity;
mod newton;

use serde::{Deserialize, Serialize};

pub use checks::{
    comparison_check, coupled_reference, disc_allowance, monotonicity_check, ComparisonReport, MonotonicityReport,
    DISC_CONSTANT,
};
pub use continuity::{continuity_path, geometric_schedule, ContinuityResult, ContinuityStep};
pub use newton::{
    linearized_twisted, solve_calabi, solve_calabi_with, solve_twisted_ma, solve_twisted_ma_with, NewtonOptions,
};

/// Convergence telemetry of a Newton solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative sup-norm residual of the equation before each step and after the last one.
    pub residual_history: Vec<f64>,
    /// Accepted step length of each iteration (0 marks a failed line search).
    pub damping_history: Vec<f64>,
    /// `sup phi - inf phi` of the returned potential.
    pub oscillation: f64,
    pub converged: bool,
}
