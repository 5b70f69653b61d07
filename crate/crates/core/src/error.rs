//! Crate-wide error type.
//!
//! Structural problems (mismatched dimensions, non-finite data) are kept
//! distinct from model-assumption violations: the former mean the input is
//! malformed, the latter mean a well-formed model left its admissible regime.

use thiserror::Error;

/// Which well-posedness condition a step failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionCheck {
    /// Some `a_ij < 0`.
    NegativeEdgeWeight,
    /// Some `beta_i <= 0`.
    NonPositiveInfectionRate,
    /// Some `delta_i < 0`.
    NegativeHealingRate,
    /// `h * delta_i > 1`.
    HealingStepTooLarge,
    /// `h * sum_j beta_i a_ij > 1`.
    InfectionRowSumTooLarge,
}

impl std::fmt::Display for AssumptionCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            AssumptionCheck::NegativeEdgeWeight => "negative edge weight",
            AssumptionCheck::NonPositiveInfectionRate => "non-positive infection rate",
            AssumptionCheck::NegativeHealingRate => "negative healing rate",
            AssumptionCheck::HealingStepTooLarge => "h*delta exceeds 1",
            AssumptionCheck::InfectionRowSumTooLarge => "h*(effective infection row sum) exceeds 1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("assumption violated at step {k}, node {node}: {check} (value {value:.6e}, bound {bound:.6e})")]
    AssumptionViolated {
        k: usize,
        node: usize,
        check: AssumptionCheck,
        value: f64,
        bound: f64,
    },

    /// State escaped `[0,1]` by more than the last-ulp clamp allows.
    #[error("state out of range at step {k}, node {node}: {value:.17e}")]
    StateOutOfRange { k: usize, node: usize, value: f64 },

    #[error("infection level outside [0,1] at node {node}: {value:.6e}")]
    InvalidState { node: usize, value: f64 },

    #[error("spectral radius iteration did not converge; bracket [{lower:.6e}, {upper:.6e}]")]
    SpectralNoConvergence { lower: f64, upper: f64 },

    #[error(
        "discrete Lyapunov equation has no positive definite solution: rho(M) = {rho:.6e} >= 1"
    )]
    LyapunovUnstable { rho: f64 },

    #[error("Lyapunov fixed-point iteration stalled after {iterations} iterations (residual {residual:.3e})")]
    LyapunovNoConvergence { iterations: usize, residual: f64 },

    /// Lyapunov solve failure while verifying a trajectory, tagged with the step.
    #[error("Lyapunov solve failed at step {k}: {source}")]
    LyapunovAtStep {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
