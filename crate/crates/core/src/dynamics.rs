//! Discrete-time epidemic dynamics.
//!
//! One step of the model advances every node synchronously:
//!
//! ```text
//! x_i(k+1) = x_i(k) + h((1 - x_i(k)) sum_j beta_i a_ij x_j(k) - delta_i x_i(k))
//! ```
//!
//! Under the well-posedness assumptions the cube `[0,1]^n` is positively
//! invariant in exact arithmetic; floating point can stray by an ulp, so
//! values within `1e-15` of the cube are clamped back onto it and anything
//! farther out is an error (it indicates violated assumptions, not noise).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{
    state_matrix_with_healing, validate_step_with, EpidemicState, ModelSequence, ModelStep,
    SequenceSource, StepSource,
};
use crate::spectral::RhoTracker;

/// Rounding noise absorbed at the `[0,1]` boundary.
const CLAMP_EPS: f64 = 1e-15;

/// Supplies the applied healing rates for step `k`, observing `x(k)` and
/// the step data before the dynamics update runs.
pub trait ControllerHook {
    fn healing_rates(
        &mut self,
        k: usize,
        x: &DVector<f64>,
        step: &ModelStep,
        h: f64,
    ) -> Result<DVector<f64>>;
}

fn clamp_unit(value: f64, k: usize, node: usize) -> Result<f64> {
    if value < 0.0 {
        if value > -CLAMP_EPS {
            return Ok(0.0);
        }
        return Err(Error::StateOutOfRange { k, node, value });
    }
    if value > 1.0 {
        if value <= 1.0 + CLAMP_EPS {
            return Ok(1.0);
        }
        return Err(Error::StateOutOfRange { k, node, value });
    }
    Ok(value)
}

/// Advances the state by one step with optional healing override.
///
/// The step data is validated (with the override applied) before the
/// update; a violation is rejected with the offending node and check.
pub fn step_with_healing(
    state: &EpidemicState,
    params: &ModelStep,
    h: f64,
    healing_override: Option<&DVector<f64>>,
) -> Result<EpidemicState> {
    let n = params.n();
    if state.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "state has {} nodes, step has {n}",
            state.n()
        )));
    }
    if let Some(d) = healing_override {
        if d.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "healing override has {} entries, expected {n}",
                d.len()
            )));
        }
    }
    if let Some(failure) = validate_step_with(params, h, state.k, healing_override).first() {
        return Err(failure.to_error());
    }

    let delta = healing_override.unwrap_or(&params.healing_rates);
    // Spread pressure: (A x)_i scaled by beta_i.
    let pressure = &params.adjacency * &state.x;
    let mut next = DVector::zeros(n);
    for i in 0..n {
        let xi = state.x[i];
        let v = xi + h * ((1.0 - xi) * params.infection_rates[i] * pressure[i] - delta[i] * xi);
        next[i] = clamp_unit(v, state.k, i)?;
    }
    Ok(EpidemicState {
        x: next,
        k: state.k + 1,
    })
}

/// One synchronous update of the epidemic state.
pub fn step(state: &EpidemicState, params: &ModelStep, h: f64) -> Result<EpidemicState> {
    step_with_healing(state, params, h, None)
}

/// A simulated run: states `x(0..=T)` with per-step scalars.
///
/// The spectral-radius series is the expensive part, so it is only filled
/// when requested (during a streamed run, or afterwards via
/// [`Trajectory::compute_rho`]).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<EpidemicState>,
    pub avg_infection: Vec<f64>,
    pub state_norm: Vec<f64>,
    /// Sampled `(k, rho(M(k)))` pairs; empty unless requested.
    pub rho: Vec<(usize, f64)>,
    /// Healing rates actually applied per step when a controller ran.
    pub applied_healing: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn final_state(&self) -> &EpidemicState {
        self.states.last().expect("trajectory holds at least x(0)")
    }

    fn record(&mut self, state: &EpidemicState) {
        self.avg_infection.push(state.average());
        self.state_norm.push(state.x.norm());
        self.states.push(state.clone());
    }

    /// Fills the `rho` series from a materialized sequence, honoring the
    /// healing rates that were applied during the run.
    pub fn compute_rho(&mut self, seq: &ModelSequence, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        let steps = self.horizon().min(seq.len());
        let mut tracker = RhoTracker::new(seq.n());
        self.rho.clear();
        for k in (0..steps).step_by(stride) {
            let healing = self.applied_healing.as_ref().map(|d| &d[k]);
            let m = state_matrix_with_healing(seq.step(k), seq.h(), healing);
            self.rho.push((k, tracker.rho(&m)?));
        }
        Ok(())
    }
}

/// Options for a simulation run.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    /// Record `rho(M(k))` every `stride` steps during the run.
    pub rho_stride: Option<usize>,
    /// Keep the applied healing rates per step (always kept when a
    /// controller is present).
    pub record_healing: bool,
}

/// Runs `horizon` steps pulled from a [`StepSource`].
///
/// When a controller is present it observes `x(k)` and the step data and
/// supplies the applied healing rates before each dynamics update, which
/// also enter the recorded `rho(M(k))` series. Errors carry the offending
/// step index.
pub fn simulate_source<S: StepSource + ?Sized>(
    source: &mut S,
    horizon: usize,
    x0: &EpidemicState,
    mut controller: Option<&mut dyn ControllerHook>,
    opts: SimulateOptions,
) -> Result<Trajectory> {
    let n = source.n();
    let h = source.h();
    if x0.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} nodes, source has {n}",
            x0.n()
        )));
    }
    let keep_healing = controller.is_some() || opts.record_healing;
    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        avg_infection: Vec::with_capacity(horizon + 1),
        state_norm: Vec::with_capacity(horizon + 1),
        rho: Vec::new(),
        applied_healing: keep_healing.then(Vec::new),
    };
    let mut state = x0.clone();
    traj.record(&state);
    let mut tracker = RhoTracker::new(n);

    for k in 0..horizon {
        let params = source.make_step(k)?;
        let healing = match controller.as_deref_mut() {
            Some(c) => Some(c.healing_rates(k, &state.x, &params, h)?),
            None => None,
        };
        if let Some(stride) = opts.rho_stride {
            if stride > 0 && k % stride == 0 {
                let m = state_matrix_with_healing(&params, h, healing.as_ref());
                traj.rho.push((k, tracker.rho(&m)?));
            }
        }
        let next = step_with_healing(&state, &params, h, healing.as_ref())?;
        if let Some(store) = traj.applied_healing.as_mut() {
            store.push(healing.unwrap_or_else(|| params.healing_rates.clone()));
        }
        state = next;
        traj.record(&state);
    }
    Ok(traj)
}

/// Simulates a materialized sequence over its whole horizon.
pub fn simulate(
    seq: &ModelSequence,
    x0: &EpidemicState,
    controller: Option<&mut dyn ControllerHook>,
) -> Result<Trajectory> {
    let mut source = SequenceSource::new(seq);
    simulate_source(
        &mut source,
        seq.len(),
        x0,
        controller,
        SimulateOptions::default(),
    )
}

/// Outcome of fitting `||x(k)|| ~ alpha * omega^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayFit {
    /// The trajectory starts (and therefore stays) at the healthy state.
    AlreadyHealthy,
    Fit {
        alpha: f64,
        omega: f64,
        /// Number of samples used for the fit.
        points: usize,
    },
}

/// Norms below this floor are excluded from the decay fit.
pub const DECAY_FLOOR: f64 = 1e-14;

/// Least-squares fit of `log ||x(k)|| ~ log alpha + k log omega` over the
/// prefix with `||x(k)||` above the floor. `omega < 1` signals empirical
/// exponential decay.
pub fn fit_decay(traj: &Trajectory) -> Result<DecayFit> {
    if traj.state_norm.first().copied() == Some(0.0) {
        return Ok(DecayFit::AlreadyHealthy);
    }
    let usable: Vec<(f64, f64)> = traj
        .state_norm
        .iter()
        .enumerate()
        .take_while(|(_, &v)| v > DECAY_FLOOR)
        .map(|(k, &v)| (k as f64, v.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 3 samples above the floor, got {}",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mean_k = usable.iter().map(|(k, _)| k).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, y) in &usable {
        num += (k - mean_k) * (y - mean_y);
        den += (k - mean_k) * (k - mean_k);
    }
    let slope = num / den;
    let intercept = mean_y - slope * mean_k;
    Ok(DecayFit::Fit {
        alpha: intercept.exp(),
        omega: slope.exp(),
        points: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{nonlinear_state_matrix, ModelStep};
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    fn step_data(a: DMatrix<f64>, beta: &[f64], delta: &[f64]) -> ModelStep {
        ModelStep::new(
            a,
            DVector::from_row_slice(beta),
            DVector::from_row_slice(delta),
        )
        .unwrap()
    }

    #[test]
    fn healthy_state_is_absorbing_bitwise() {
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 0.2, 0.1]);
        let s = step_data(a, &[1.0, 0.5], &[0.4, 0.9]);
        let x0 = EpidemicState::healthy(2);
        let x1 = step(&x0, &s, 0.5).unwrap();
        assert!(x1.x.iter().all(|&v| v == 0.0));
        assert_eq!(x1.k, 1);
    }

    #[test]
    fn full_infection_kills_spread_term() {
        // n=1, x=1, h*delta = 0.5: next = 1 - 0.5 = 0.5 regardless of beta.
        let a = DMatrix::from_element(1, 1, 1.0);
        let s = step_data(a, &[1.0], &[1.0]);
        let x = EpidemicState::new(DVector::from_element(1, 1.0), 0).unwrap();
        let next = step(&x, &s, 0.5).unwrap();
        assert!((next.x[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_node_worked_example() {
        // x=(0.5,0), beta=1, A=[[0,1],[1,0]], delta=0, h=0.5 -> (0.5, 0.25).
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = step_data(a, &[1.0, 1.0], &[0.0, 0.0]);
        let x = EpidemicState::new(DVector::from_row_slice(&[0.5, 0.0]), 0).unwrap();
        let next = step(&x, &s, 0.5).unwrap();
        assert!((next.x[0] - 0.5).abs() < 1e-15);
        assert!((next.x[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_assumption_violation_with_diagnostic() {
        let a = DMatrix::zeros(2, 2);
        let s = step_data(a, &[1.0, 1.0], &[0.0, 3.0]);
        let x = EpidemicState::healthy(2);
        match step(&x, &s, 0.5) {
            Err(Error::AssumptionViolated { node: 1, .. }) => {}
            other => panic!("expected violation at node 1, got {other:?}"),
        }
    }

    #[test]
    fn isolated_healthy_node_stays_exactly_zero() {
        // Node 1 has no in-edges from infected nodes.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let s = step_data(a, &[0.9, 0.9], &[0.1, 0.1]);
        let x = EpidemicState::new(DVector::from_row_slice(&[0.6, 0.0]), 0).unwrap();
        let next = step(&x, &s, 0.5).unwrap();
        assert_eq!(next.x[1], 0.0);
    }

    #[test]
    fn step_agrees_with_nonlinear_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0f64));
            let beta = DVector::from_fn(n, |_, _| rng.random_range(0.01..1.0f64));
            let delta = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0f64));
            let s = ModelStep::new(a, beta, delta).unwrap();
            let max_row = s.effective_row_sums().iter().fold(0.0f64, |m, &v| m.max(v));
            let h = 0.9 / max_row.max(1.0);
            let x =
                EpidemicState::new(DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0f64)), 0)
                    .unwrap();
            let direct = step(&x, &s, h).unwrap();
            let via_matrix = nonlinear_state_matrix(&s, &x, h) * &x.x;
            for i in 0..n {
                assert!((direct.x[i] - via_matrix[i]).abs() <= 1e-12);
            }
        }
    }

    fn constant_sequence(m_scale: f64, n: usize, steps: usize) -> ModelSequence {
        // M = m_scale * I realized as delta = (1 - m_scale)/h, Bbar = 0.
        let h = 0.5;
        let delta = (1.0 - m_scale) / h;
        let s = step_data(DMatrix::zeros(n, n), &vec![1.0; n], &vec![delta; n]);
        ModelSequence::new(vec![s; steps], h).unwrap()
    }

    #[test]
    fn zero_start_stays_zero_over_horizon() {
        let seq = constant_sequence(0.9, 4, 100);
        let traj = simulate(&seq, &EpidemicState::healthy(4), None).unwrap();
        assert_eq!(traj.horizon(), 100);
        assert!(traj.state_norm.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stable_system_decays_monotonically() {
        let seq = constant_sequence(0.8, 3, 50);
        let x0 = EpidemicState::new(DVector::from_element(3, 0.5), 0).unwrap();
        let traj = simulate(&seq, &x0, None).unwrap();
        for w in traj.state_norm.windows(2) {
            assert!(w[1] < w[0]);
        }
        // Independent iteration oracle: x(k+1) = 0.8 x(k) elementwise.
        let mut expected = 0.5f64;
        for k in 0..=50 {
            assert!((traj.avg_infection[k] - expected).abs() < 1e-12);
            expected *= 0.8;
        }
    }

    #[test]
    fn horizon_zero_returns_only_initial_state() {
        let seq = constant_sequence(0.8, 3, 1);
        let x0 = EpidemicState::new(DVector::from_element(3, 0.25), 0).unwrap();
        let mut source = SequenceSource::new(&seq);
        let traj = simulate_source(&mut source, 0, &x0, None, SimulateOptions::default()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.states[0].x, x0.x);
    }

    #[test]
    fn fit_decay_exact_geometric() {
        let mut traj = Trajectory {
            states: Vec::new(),
            avg_infection: Vec::new(),
            state_norm: (0..30).map(|k| 0.5f64.powi(k)).collect(),
            rho: Vec::new(),
            applied_healing: None,
        };
        traj.avg_infection = traj.state_norm.clone();
        match fit_decay(&traj).unwrap() {
            DecayFit::Fit { omega, .. } => assert!((omega - 0.5).abs() < 1e-9),
            other => panic!("expected fit, got {other:?}"),
        }
    }

    #[test]
    fn fit_decay_constant_norm_gives_omega_one() {
        let traj = Trajectory {
            states: Vec::new(),
            avg_infection: vec![0.3; 20],
            state_norm: vec![0.3; 20],
            rho: Vec::new(),
            applied_healing: None,
        };
        match fit_decay(&traj).unwrap() {
            DecayFit::Fit { omega, .. } => assert!((omega - 1.0).abs() < 1e-9),
            other => panic!("expected fit, got {other:?}"),
        }
    }

    #[test]
    fn fit_decay_from_simulated_linear_system() {
        // M = 0.8 I, x0 = ones: omega should come out at 0.8.
        let seq = constant_sequence(0.8, 5, 60);
        let x0 = EpidemicState::new(DVector::from_element(5, 1.0), 0).unwrap();
        let traj = simulate(&seq, &x0, None).unwrap();
        match fit_decay(&traj).unwrap() {
            DecayFit::Fit { omega, .. } => assert!((omega - 0.8).abs() < 1e-6),
            other => panic!("expected fit, got {other:?}"),
        }
    }

    #[test]
    fn fit_decay_rejects_too_short_prefix() {
        // Nonzero start but only two samples above the floor.
        let traj = Trajectory {
            states: Vec::new(),
            avg_infection: vec![0.4, 0.2, 0.0, 0.0],
            state_norm: vec![0.4, 0.2, 0.0, 0.0],
            rho: Vec::new(),
            applied_healing: None,
        };
        assert!(matches!(
            fit_decay(&traj),
            Err(crate::error::Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_decay_healthy_trajectory() {
        let seq = constant_sequence(0.8, 3, 10);
        let traj = simulate(&seq, &EpidemicState::healthy(3), None).unwrap();
        assert_eq!(fit_decay(&traj).unwrap(), DecayFit::AlreadyHealthy);
    }

    #[test]
    fn positive_invariance_random_valid_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let n = rng.random_range(1..=10);
            let a = DMatrix::from_fn(n, n, |_, _| {
                if rng.random_range(0.0..1.0f64) < 0.4 {
                    rng.random_range(0.0..2.0)
                } else {
                    0.0
                }
            });
            let beta = DVector::from_fn(n, |_, _| rng.random_range(0.01..2.0f64));
            let delta = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0f64));
            let s = ModelStep::new(a, beta, delta).unwrap();
            let max_row = s.effective_row_sums().iter().fold(0.0f64, |m, &v| m.max(v));
            let h = (1.0 / max_row.max(1.0)).min(1.0) * rng.random_range(0.1..1.0);
            let x = EpidemicState::new(
                DVector::from_fn(n, |_, _| rng.random_range(0.0..=1.0f64)),
                0,
            )
            .unwrap();
            let next = step(&x, &s, h).unwrap();
            assert!(next.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn rho_series_on_materialized_sequence() {
        let seq = constant_sequence(0.8, 3, 20);
        let x0 = EpidemicState::new(DVector::from_element(3, 0.5), 0).unwrap();
        let mut traj = simulate(&seq, &x0, None).unwrap();
        traj.compute_rho(&seq, 5).unwrap();
        assert_eq!(traj.rho.len(), 4);
        for &(_, r) in &traj.rho {
            assert!((r - 0.8).abs() < 1e-9);
        }
    }
}
