//! System data for the discrete-time networked SIS model.
//!
//! A [`ModelStep`] holds the per-step data `(A(k), beta(k), delta(k))`; a
//! [`ModelSequence`] is a finite horizon of steps plus the sampling
//! parameter `h`. The effective infection matrix is `Bbar(k) = B(k) A(k)`
//! with `B = diag(beta_i)`, and the linearization of the dynamics at the
//! healthy state is
//!
//! ```text
//! M(k) = I - h D(k) + h Bbar(k),        D = diag(delta_i)
//! ```
//!
//! All types are plain immutable values; nothing here mutates after
//! construction, so everything can be shared freely across workers.

use nalgebra::{DMatrix, DVector};

use crate::error::{AssumptionCheck, Error, Result};

/// One step of the time-varying model: interconnection weights and rates.
///
/// Constructors only enforce structural consistency (shapes, finiteness).
/// Sign conditions and the well-posedness bounds are the job of
/// [`check_assumptions`], which reports them instead of refusing to build.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStep {
    /// Interconnection intensities `a_ij >= 0`, n x n.
    pub adjacency: DMatrix<f64>,
    /// Per-node infection rates `beta_i > 0`.
    pub infection_rates: DVector<f64>,
    /// Per-node healing rates `delta_i >= 0`.
    pub healing_rates: DVector<f64>,
}

impl ModelStep {
    pub fn new(
        adjacency: DMatrix<f64>,
        infection_rates: DVector<f64>,
        healing_rates: DVector<f64>,
    ) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if infection_rates.len() != n || healing_rates.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rate vectors must have length {n}, got beta: {}, delta: {}",
                infection_rates.len(),
                healing_rates.len()
            )));
        }
        if adjacency.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adjacency".into()));
        }
        if infection_rates.iter().any(|v| !v.is_finite())
            || healing_rates.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("rates".into()));
        }
        Ok(Self {
            adjacency,
            infection_rates,
            healing_rates,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Effective infection matrix `Bbar = B A`, i.e. row `i` of `A` scaled by `beta_i`.
    pub fn effective_infection(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = self.adjacency.clone();
        for j in 0..n {
            for i in 0..n {
                m[(i, j)] *= self.infection_rates[i];
            }
        }
        m
    }

    /// Row sums of `Bbar`: `beta_i * sum_j a_ij`.
    pub fn effective_row_sums(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |i, _| {
            self.infection_rates[i] * self.adjacency.row(i).iter().sum::<f64>()
        })
    }
}

/// Infection-level vector `x(k)` with its step index.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicState {
    pub x: DVector<f64>,
    pub k: usize,
}

impl EpidemicState {
    /// Builds a state, rejecting any entry outside `[0,1]`.
    pub fn new(x: DVector<f64>, k: usize) -> Result<Self> {
        for (node, &v) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidState { node, value: v });
            }
        }
        Ok(Self { x, k })
    }

    /// All-healthy state of dimension `n`.
    pub fn healthy(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            k: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Mean infection level.
    pub fn average(&self) -> f64 {
        if self.x.is_empty() {
            0.0
        } else {
            self.x.sum() / self.x.len() as f64
        }
    }
}

/// A finite horizon of model steps with the sampling parameter `h`.
///
/// Step `k` of the sequence carries the data used to advance `x(k)` to
/// `x(k+1)`; a sequence of length `T` therefore supports a `T`-step
/// simulation. Well-posedness is a derived property: the sequence is
/// well-posed exactly when [`check_assumptions`] passes for every step.
#[derive(Debug, Clone)]
pub struct ModelSequence {
    steps: Vec<ModelStep>,
    h: f64,
    n: usize,
}

impl ModelSequence {
    pub fn new(steps: Vec<ModelStep>, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!(
                "sampling parameter h must be positive, got {h}"
            )));
        }
        let n = match steps.first() {
            Some(s) => s.n(),
            None => {
                return Err(Error::Config(
                    "model sequence must contain at least one step".into(),
                ))
            }
        };
        for (k, s) in steps.iter().enumerate() {
            if s.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "step {k} has {} agents, expected {n}",
                    s.n()
                )));
            }
        }
        Ok(Self { steps, h, n })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn step(&self, k: usize) -> &ModelStep {
        &self.steps[k]
    }

    pub fn steps(&self) -> &[ModelStep] {
        &self.steps
    }

    /// True exactly when every step passes the assumption checks.
    pub fn well_posed(&self) -> bool {
        check_assumptions(self).pass
    }

    /// State matrices `M(k)` for the whole horizon.
    pub fn state_matrices(&self) -> Vec<DMatrix<f64>> {
        self.steps.iter().map(|s| state_matrix(s, self.h)).collect()
    }
}

/// Yields model steps one `k` at a time.
///
/// Implemented both by materialized sequences (replay) and by scenario
/// generators that build each step on the fly; `make_step` must be called
/// with consecutive `k` starting from 0.
pub trait StepSource {
    fn n(&self) -> usize;
    fn h(&self) -> f64;
    fn make_step(&mut self, k: usize) -> Result<ModelStep>;
}

/// Replay adapter over a materialized [`ModelSequence`].
pub struct SequenceSource<'a> {
    seq: &'a ModelSequence,
}

impl<'a> SequenceSource<'a> {
    pub fn new(seq: &'a ModelSequence) -> Self {
        Self { seq }
    }
}

impl StepSource for SequenceSource<'_> {
    fn n(&self) -> usize {
        self.seq.n()
    }

    fn h(&self) -> f64 {
        self.seq.h()
    }

    fn make_step(&mut self, k: usize) -> Result<ModelStep> {
        if k >= self.seq.len() {
            return Err(Error::InsufficientData(format!(
                "sequence has {} steps, requested step {k}",
                self.seq.len()
            )));
        }
        Ok(self.seq.step(k).clone())
    }
}

/// One failed condition in an assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionFailure {
    pub k: usize,
    pub node: usize,
    pub check: AssumptionCheck,
    pub value: f64,
    pub bound: f64,
}

impl AssumptionFailure {
    pub fn to_error(&self) -> Error {
        Error::AssumptionViolated {
            k: self.k,
            node: self.node,
            check: self.check,
            value: self.value,
            bound: self.bound,
        }
    }
}

/// Outcome of validating a sequence against the model's two assumptions.
///
/// `min_healing_slack` is the smallest observed `1 - h*delta_i` and
/// `min_infection_slack` the smallest `1 - h*sum_j beta_i a_ij`; for the
/// zero system both slacks are exactly 1.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub n: usize,
    pub h: f64,
    pub steps: usize,
    pub failures: Vec<AssumptionFailure>,
    pub min_healing_slack: f64,
    pub min_infection_slack: f64,
    pub pass: bool,
}

/// Validates one step for a given `h`.
///
/// Checks, per node: `a_ij >= 0`, `beta_i > 0`, `delta_i >= 0`,
/// `h*delta_i <= 1`, and `h * beta_i * sum_j a_ij <= 1`.
pub fn validate_step(step: &ModelStep, h: f64, k: usize) -> Vec<AssumptionFailure> {
    validate_step_with(step, h, k, None)
}

/// [`validate_step`] with the healing rates replaced (controller path).
pub fn validate_step_with(
    step: &ModelStep,
    h: f64,
    k: usize,
    healing_override: Option<&DVector<f64>>,
) -> Vec<AssumptionFailure> {
    let n = step.n();
    let healing = healing_override.unwrap_or(&step.healing_rates);
    let mut failures = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = step.adjacency[(i, j)];
            if a < 0.0 {
                failures.push(AssumptionFailure {
                    k,
                    node: i,
                    check: AssumptionCheck::NegativeEdgeWeight,
                    value: a,
                    bound: 0.0,
                });
            }
        }
        let beta = step.infection_rates[i];
        if beta <= 0.0 {
            failures.push(AssumptionFailure {
                k,
                node: i,
                check: AssumptionCheck::NonPositiveInfectionRate,
                value: beta,
                bound: 0.0,
            });
        }
        let delta = healing[i];
        if delta < 0.0 {
            failures.push(AssumptionFailure {
                k,
                node: i,
                check: AssumptionCheck::NegativeHealingRate,
                value: delta,
                bound: 0.0,
            });
        }
        if h * delta > 1.0 {
            failures.push(AssumptionFailure {
                k,
                node: i,
                check: AssumptionCheck::HealingStepTooLarge,
                value: h * delta,
                bound: 1.0,
            });
        }
        let row = beta * step.adjacency.row(i).iter().sum::<f64>();
        if h * row > 1.0 {
            failures.push(AssumptionFailure {
                k,
                node: i,
                check: AssumptionCheck::InfectionRowSumTooLarge,
                value: h * row,
                bound: 1.0,
            });
        }
    }
    failures
}

/// Checks the non-negativity and well-posedness assumptions on every step.
///
/// The check on the infection side uses the effective rates
/// `beta_i * a_ij` (only those enter the dynamics), matching the row-sum
/// hypothesis used by the mitigation results.
pub fn check_assumptions(seq: &ModelSequence) -> ValidationReport {
    let h = seq.h();
    let mut failures = Vec::new();
    let mut min_healing_slack = f64::INFINITY;
    let mut min_infection_slack = f64::INFINITY;
    for (k, step) in seq.steps().iter().enumerate() {
        failures.extend(validate_step(step, h, k));
        for i in 0..step.n() {
            min_healing_slack = min_healing_slack.min(1.0 - h * step.healing_rates[i]);
        }
        for (i, row) in step.effective_row_sums().iter().enumerate() {
            let _ = i;
            min_infection_slack = min_infection_slack.min(1.0 - h * row);
        }
    }
    let pass = failures.is_empty();
    ValidationReport {
        n: seq.n(),
        h,
        steps: seq.len(),
        failures,
        min_healing_slack,
        min_infection_slack,
        pass,
    }
}

/// State matrix `M(k) = I - h D(k) + h Bbar(k)`, the linearization of the
/// dynamics at the healthy state. No clamping is applied.
pub fn state_matrix(step: &ModelStep, h: f64) -> DMatrix<f64> {
    state_matrix_with_healing(step, h, None)
}

/// `M(k)` with the healing rates replaced (used when a controller overrides
/// `delta`); `None` uses the step's own rates.
pub fn state_matrix_with_healing(
    step: &ModelStep,
    h: f64,
    healing_override: Option<&DVector<f64>>,
) -> DMatrix<f64> {
    let n = step.n();
    let delta = healing_override.unwrap_or(&step.healing_rates);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = h * step.infection_rates[i] * step.adjacency[(i, j)];
        }
    }
    for i in 0..n {
        m[(i, i)] += 1.0 - h * delta[i];
    }
    m
}

/// State-dependent matrix `Mhat(k) = I + h((I - X(k)) Bbar(k) - D(k))`,
/// which reproduces the full nonlinear update as `x(k+1) = Mhat(k) x(k)`.
pub fn nonlinear_state_matrix(step: &ModelStep, state: &EpidemicState, h: f64) -> DMatrix<f64> {
    let n = step.n();
    debug_assert_eq!(state.n(), n);
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = h * (1.0 - state.x[i]) * step.infection_rates[i] * step.adjacency[(i, j)];
        }
    }
    for i in 0..n {
        m[(i, i)] += 1.0 - h * step.healing_rates[i];
    }
    m
}
