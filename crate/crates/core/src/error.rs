use thiserror::Error;

use crate::ma::SolveReport;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what} at grid index {index}")]
    NonFinite { what: String, index: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("chart mismatch: {0}")]
    ChartMismatch(String),

    #[error("positivity violation in {what}: smallest eigenvalue {min_eig:e} at grid index {index}")]
    Positivity {
        what: String,
        index: usize,
        min_eig: f64,
    },

    #[error("{what} did not converge (residual {residual:e} after {iterations} iterations)")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
        report: Option<Box<SolveReport>>,
    },

    #[error("left the Kahler cone at t = {t}: smallest eigenvalue {min_eig:e} at grid index {index}")]
    ConeExit { t: f64, index: usize, min_eig: f64 },

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("model invariant violated: {0}")]
    Model(String),

    #[error("step {step} of the continuity path failed: {source}")]
    ContinuityStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fiber solve failed at base index {index}: {source}")]
    FiberSolve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parameter t = {t} is outside the admissible range: {source}")]
    Parameter {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
