//! Data-driven healing-rate mitigation.
//!
//! The control law raises each node's healing rate from accumulated
//! observed infection, saturating at the largest value the discretization
//! admits:
//!
//! ```text
//! psi_i(k)       = min{ gamma_i(k) * sum_j a_ij(k) + eta_i,  1/h }
//! delta_hat_i(k) = max{ delta_hat_i(k-1), psi_i(k) }
//! ```
//!
//! `gamma` accumulates either the global infection mass (centralized: one
//! scalar broadcast to every node) or each node's own plus neighborhood
//! infection (distributed). Both `gamma` and `delta_hat` are nondecreasing
//! by construction and `delta_hat <= 1/h` always.
//!
//! Per-step evaluation order: observe `x(k)`, compute `psi_i(k)` from the
//! *current* `gamma_i(k)`, fold into `delta_hat_i(k)`, then advance
//! `gamma` to `gamma(k+1)`; the dynamics update runs last. The law never
//! lowers healing below the uncontrolled model, so `delta_hat(-1)` is
//! seeded from the model's own rates at step 0.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::ControllerHook;
use crate::error::{Error, Result};
use crate::model::{ModelSequence, ModelStep};
use crate::netgen::is_irreducible;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerMode {
    /// One scalar `gamma(k)` updated from the total infection mass.
    Centralized,
    /// Per-node `gamma_i(k)` updated from the node's neighborhood.
    Distributed,
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControllerMode::Centralized => f.write_str("centralized"),
            ControllerMode::Distributed => f.write_str("distributed"),
        }
    }
}

/// Mutable controller data: `gamma`, the applied rates, and configuration.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// `gamma_i(k)`; in centralized mode all entries stay equal.
    pub gamma: DVector<f64>,
    /// Applied healing rates `delta_hat_i(k-1)`, in `[0, 1/h]`.
    pub delta_hat: DVector<f64>,
    /// Gains `eta_i > 0`.
    pub eta: DVector<f64>,
    pub mode: ControllerMode,
    h: f64,
    inv_h: f64,
}

impl ControllerState {
    /// `initial_healing` seeds `delta_hat(-1)` from the uncontrolled model
    /// (the controller only ever increases healing).
    pub fn new(
        mode: ControllerMode,
        eta: DVector<f64>,
        initial_healing: &DVector<f64>,
        h: f64,
    ) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("controller needs h > 0, got {h}")));
        }
        if eta.len() != initial_healing.len() {
            return Err(Error::DimensionMismatch(format!(
                "eta has {} entries, initial healing {}",
                eta.len(),
                initial_healing.len()
            )));
        }
        if let Some(i) = eta.iter().position(|&e| !e.is_finite() || e <= 0.0) {
            return Err(Error::Config(format!(
                "eta must be positive at every node; eta_{i} = {}",
                eta[i]
            )));
        }
        let inv_h = 1.0 / h;
        let delta_hat = initial_healing.map(|d| d.min(inv_h).max(0.0));
        Ok(Self {
            gamma: DVector::zeros(eta.len()),
            delta_hat,
            eta,
            mode,
            h,
            inv_h,
        })
    }

    /// Uniform-gain convenience constructor.
    pub fn uniform(
        mode: ControllerMode,
        n: usize,
        eta: f64,
        initial_healing: &DVector<f64>,
        h: f64,
    ) -> Result<Self> {
        Self::new(mode, DVector::from_element(n, eta), initial_healing, h)
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// The saturation level `1/h`.
    pub fn saturation(&self) -> f64 {
        self.inv_h
    }

    /// True when every node is pinned at `1/h`.
    pub fn fully_saturated(&self) -> bool {
        self.delta_hat.iter().all(|&d| d >= self.inv_h)
    }
}

/// Applies the saturated healing law for one step; returns `psi(k)` and
/// leaves the updated rates in `ctrl.delta_hat`.
pub fn healing_control(
    ctrl: &mut ControllerState,
    adjacency: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let n = ctrl.n();
    if adjacency.nrows() != n || adjacency.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "adjacency is {}x{}, controller has {n} nodes",
            adjacency.nrows(),
            adjacency.ncols()
        )));
    }
    let mut psi = DVector::zeros(n);
    for i in 0..n {
        let row_sum: f64 = adjacency.row(i).iter().sum();
        psi[i] = (ctrl.gamma[i] * row_sum + ctrl.eta[i]).min(ctrl.inv_h);
        ctrl.delta_hat[i] = ctrl.delta_hat[i].max(psi[i]);
    }
    Ok(psi)
}

/// Centralized accumulator: `gamma(k+1) = gamma(k) + sum_i x_i(k)`,
/// broadcast to every node.
pub fn centralized_gamma_update(ctrl: &mut ControllerState, x: &DVector<f64>) -> Result<()> {
    if ctrl.mode != ControllerMode::Centralized {
        return Err(Error::Config(
            "centralized gamma update called on a distributed controller".into(),
        ));
    }
    let next = ctrl.gamma[0] + x.sum();
    ctrl.gamma.fill(next);
    Ok(())
}

/// Distributed accumulator:
/// `gamma_i(k+1) = gamma_i(k) + x_i(k) + sum_{j in N_i(k)} x_j(k)` with
/// `N_i(k) = {j : a_ij(k) != 0}` taken literally from the nonzero pattern
/// (a self-loop re-counts the node's own level).
pub fn distributed_gamma_update(
    ctrl: &mut ControllerState,
    x: &DVector<f64>,
    adjacency: &DMatrix<f64>,
) -> Result<()> {
    if ctrl.mode != ControllerMode::Distributed {
        return Err(Error::Config(
            "distributed gamma update called on a centralized controller".into(),
        ));
    }
    let n = ctrl.n();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..n {
            if adjacency[(i, j)] != 0.0 {
                acc += x[j];
            }
        }
        ctrl.gamma[i] += acc;
    }
    Ok(())
}

/// One row of the per-step controller trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub k: usize,
    pub node: usize,
    /// `gamma_i(k)` as used inside `psi_i(k)`.
    pub gamma: f64,
    pub psi: f64,
    pub delta_hat: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ControllerTrace {
    pub rows: Vec<TraceRow>,
}

/// Controller plugged into the simulation loop.
pub struct Controller {
    state: ControllerState,
    trace: Option<ControllerTrace>,
    /// First step at which every node was saturated, if any.
    saturated_at: Option<usize>,
}

impl Controller {
    pub fn new(state: ControllerState) -> Self {
        Self {
            state,
            trace: None,
            saturated_at: None,
        }
    }

    /// Enables per-step tracing (k, node, gamma, psi, delta_hat, saturated).
    pub fn with_trace(state: ControllerState) -> Self {
        Self {
            state,
            trace: Some(ControllerTrace::default()),
            saturated_at: None,
        }
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn saturated_at(&self) -> Option<usize> {
        self.saturated_at
    }

    pub fn take_trace(&mut self) -> Option<ControllerTrace> {
        self.trace.take()
    }
}

impl ControllerHook for Controller {
    fn healing_rates(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        step: &ModelStep,
        _h: f64,
    ) -> Result<DVector<f64>> {
        let gamma_used = self.state.gamma.clone();
        let psi = healing_control(&mut self.state, &step.adjacency)?;
        if let Some(trace) = self.trace.as_mut() {
            for i in 0..self.state.n() {
                trace.rows.push(TraceRow {
                    k,
                    node: i,
                    gamma: gamma_used[i],
                    psi: psi[i],
                    delta_hat: self.state.delta_hat[i],
                    saturated: self.state.delta_hat[i] >= self.state.inv_h,
                });
            }
        }
        if self.saturated_at.is_none() && self.state.fully_saturated() {
            self.saturated_at = Some(k);
        }
        match self.state.mode {
            ControllerMode::Centralized => centralized_gamma_update(&mut self.state, x)?,
            ControllerMode::Distributed => {
                distributed_gamma_update(&mut self.state, x, &step.adjacency)?
            }
        }
        Ok(self.state.delta_hat.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlTheorem {
    Centralized,
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    RowSumBound,
    HomogeneousInfectionRates,
    SymmetricAdjacency,
    PositiveDiagonal,
    Irreducible,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Hypothesis::RowSumBound => "h*beta*row sum < 1",
            Hypothesis::HomogeneousInfectionRates => "homogeneous infection rates",
            Hypothesis::SymmetricAdjacency => "symmetric adjacency",
            Hypothesis::PositiveDiagonal => "positive diagonal",
            Hypothesis::Irreducible => "irreducible adjacency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisFailure {
    pub hypothesis: Hypothesis,
    pub k: usize,
    pub node: Option<usize>,
    pub value: f64,
}

/// Hypothesis audit for one of the two mitigation guarantees.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub theorem: ControlTheorem,
    pub pass: bool,
    pub failures: Vec<HypothesisFailure>,
    /// `1 - max_k max_i h*beta_i*sum_j a_ij`; positive when the bound holds.
    pub row_sum_margin: f64,
    /// Whether `psi_i(k) = psi(k)` can hold literally (uniform row sums);
    /// informational, never a failure.
    pub psi_uniform: bool,
}

const HOMOGENEITY_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

fn common_hypotheses(seq: &ModelSequence, failures: &mut Vec<HypothesisFailure>) -> (f64, bool) {
    let h = seq.h();
    let mut worst_row = 0.0f64;
    let mut psi_uniform = true;
    for (k, step) in seq.steps().iter().enumerate() {
        let n = step.n();
        let beta0 = step.infection_rates[0];
        let mut first_row_sum = None;
        for i in 0..n {
            let beta = step.infection_rates[i];
            if (beta - beta0).abs() > HOMOGENEITY_TOL {
                failures.push(HypothesisFailure {
                    hypothesis: Hypothesis::HomogeneousInfectionRates,
                    k,
                    node: Some(i),
                    value: beta,
                });
            }
            let row_sum: f64 = step.adjacency.row(i).iter().sum();
            let bound = h * beta * row_sum;
            worst_row = worst_row.max(bound);
            if bound >= 1.0 {
                failures.push(HypothesisFailure {
                    hypothesis: Hypothesis::RowSumBound,
                    k,
                    node: Some(i),
                    value: bound,
                });
            }
            match first_row_sum {
                None => first_row_sum = Some(row_sum),
                Some(r0) => {
                    if (row_sum - r0).abs() > 1e-12 {
                        psi_uniform = false;
                    }
                }
            }
        }
        'sym: for i in 0..n {
            for j in (i + 1)..n {
                let d = (step.adjacency[(i, j)] - step.adjacency[(j, i)]).abs();
                if d > SYMMETRY_TOL {
                    failures.push(HypothesisFailure {
                        hypothesis: Hypothesis::SymmetricAdjacency,
                        k,
                        node: None,
                        value: d,
                    });
                    break 'sym;
                }
            }
        }
    }
    (1.0 - worst_row, psi_uniform)
}

/// Hypotheses for the centralized guarantee: strict row-sum bound,
/// homogeneous rates, symmetric adjacency, positive diagonal.
pub fn check_theorem3_hypotheses(seq: &ModelSequence) -> HypothesisReport {
    let mut failures = Vec::new();
    let (row_sum_margin, psi_uniform) = common_hypotheses(seq, &mut failures);
    for (k, step) in seq.steps().iter().enumerate() {
        for i in 0..step.n() {
            let d = step.adjacency[(i, i)];
            if d <= 0.0 {
                failures.push(HypothesisFailure {
                    hypothesis: Hypothesis::PositiveDiagonal,
                    k,
                    node: Some(i),
                    value: d,
                });
            }
        }
    }
    HypothesisReport {
        theorem: ControlTheorem::Centralized,
        pass: failures.is_empty(),
        failures,
        row_sum_margin,
        psi_uniform,
    }
}

/// Hypotheses for the distributed guarantee: strict row-sum bound,
/// homogeneous rates, symmetric and irreducible adjacency.
pub fn check_theorem4_hypotheses(seq: &ModelSequence) -> HypothesisReport {
    let mut failures = Vec::new();
    let (row_sum_margin, psi_uniform) = common_hypotheses(seq, &mut failures);
    for (k, step) in seq.steps().iter().enumerate() {
        if !is_irreducible(&step.adjacency) {
            failures.push(HypothesisFailure {
                hypothesis: Hypothesis::Irreducible,
                k,
                node: None,
                value: 0.0,
            });
        }
    }
    HypothesisReport {
        theorem: ControlTheorem::Distributed,
        pass: failures.is_empty(),
        failures,
        row_sum_margin,
        psi_uniform,
    }
}
