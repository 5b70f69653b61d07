//! Time-varying network generation: bouncing agents in a box with
//! proximity-based adjacency.
//!
//! Agents live in a square of side `l` centered at `z_c`, move with
//! piecewise-constant drifts, and bounce off the walls. The graph at each
//! step connects agents within radius `r` with unit weights (plus optional
//! unit self-loops, which the centralized mitigation guarantee needs).
//!
//! Two boundary rules are available. The default reflects overshoot back
//! into the box (billiard reflection) and flips the drift component, which
//! keeps the box invariant exactly. The literal rule flips the drift only
//! when a coordinate lands *exactly* on a wall; with real-valued positions
//! that event almost never fires, so agents can escape — it exists behind
//! a config switch for fidelity experiments only.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EpidemicState, ModelSequence, ModelStep, StepSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Billiard reflection: overshoot is folded back, drift flips sign.
    #[default]
    Reflect,
    /// Literal rule: drift flips only on exact boundary equality; the
    /// position update itself is unclamped.
    EqualityFlip,
}

/// Agent positions and drifts inside the box.
#[derive(Debug, Clone)]
pub struct MobilityState {
    pub positions: Vec<[f64; 2]>,
    pub drifts: Vec<[f64; 2]>,
    pub center: [f64; 2],
    pub side: f64,
    pub rule: BoundaryRule,
}

impl MobilityState {
    pub fn new(
        positions: Vec<[f64; 2]>,
        drifts: Vec<[f64; 2]>,
        center: [f64; 2],
        side: f64,
        rule: BoundaryRule,
    ) -> Result<Self> {
        if positions.len() != drifts.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions vs {} drifts",
                positions.len(),
                drifts.len()
            )));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::Config(format!(
                "box side must be positive, got {side}"
            )));
        }
        for (i, z) in positions.iter().enumerate() {
            for d in 0..2 {
                let lo = center[d] - side / 2.0;
                let hi = center[d] + side / 2.0;
                if !(lo..=hi).contains(&z[d]) {
                    return Err(Error::Config(format!(
                        "agent {i} starts outside the box in dimension {d}: {}",
                        z[d]
                    )));
                }
            }
        }
        for (i, phi) in drifts.iter().enumerate() {
            for (d, comp) in phi.iter().enumerate() {
                if comp.abs() > side {
                    return Err(Error::Config(format!(
                        "drift of agent {i} exceeds the box side in dimension {d}: {comp}"
                    )));
                }
            }
        }
        Ok(Self {
            positions,
            drifts,
            center,
            side,
            rule,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Advances positions and drifts in place by one step.
    pub fn advance(&mut self) {
        let half = self.side / 2.0;
        match self.rule {
            BoundaryRule::Reflect => {
                for (z, phi) in self.positions.iter_mut().zip(self.drifts.iter_mut()) {
                    for d in 0..2 {
                        let lo = self.center[d] - half;
                        let hi = self.center[d] + half;
                        let mut v = z[d] + phi[d];
                        if v > hi {
                            v = 2.0 * hi - v;
                            phi[d] = -phi[d];
                        } else if v < lo {
                            v = 2.0 * lo - v;
                            phi[d] = -phi[d];
                        }
                        z[d] = v;
                    }
                }
            }
            BoundaryRule::EqualityFlip => {
                for (z, phi) in self.positions.iter_mut().zip(self.drifts.iter_mut()) {
                    for d in 0..2 {
                        let lo = self.center[d] - half;
                        let hi = self.center[d] + half;
                        let on_wall = z[d] == hi || z[d] == lo;
                        z[d] += phi[d];
                        if on_wall {
                            phi[d] = -phi[d];
                        }
                    }
                }
            }
        }
    }
}

/// One mobility step as a pure function.
pub fn mobility_step(mob: &MobilityState) -> MobilityState {
    let mut next = mob.clone();
    next.advance();
    next
}

/// Proximity-graph parameters. Weights are binary: 1 within the radius,
/// 0 outside, `self_loop_weight` on the diagonal.
#[derive(Debug, Clone, Copy)]
pub struct GraphConfig {
    pub radius: f64,
    pub self_loop_weight: f64,
}

/// Builds the proximity adjacency: `a_ij = 1` iff `i != j` and
/// `||z_i - z_j|| <= r`; `a_ii = self_loop_weight`. Symmetric by
/// construction.
pub fn build_adjacency(mob: &MobilityState, cfg: &GraphConfig) -> DMatrix<f64> {
    let n = mob.n();
    let r2 = cfg.radius * cfg.radius;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = cfg.self_loop_weight;
        for j in (i + 1)..n {
            let dx = mob.positions[i][0] - mob.positions[j][0];
            let dy = mob.positions[i][1] - mob.positions[j][1];
            if dx * dx + dy * dy <= r2 {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

/// True iff the directed graph on the nonzero pattern of `a` is strongly
/// connected (for symmetric matrices this is plain connectivity). Both a
/// forward and a reverse reachability sweep from node 0 must cover the
/// graph.
pub fn is_irreducible(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    if n <= 1 {
        return true;
    }
    let reaches_all = |transpose: bool| -> bool {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if transpose { a[(j, i)] } else { a[(i, j)] };
                if w != 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    };
    reaches_all(false) && reaches_all(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ControllerChoice {
    #[default]
    None,
    Centralized,
    Distributed,
}

impl std::fmt::Display for ControllerChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ControllerChoice::None => "none",
            ControllerChoice::Centralized => "centralized",
            ControllerChoice::Distributed => "distributed",
        };
        f.write_str(s)
    }
}

/// Scenario configuration (the on-disk schema; see the CLI documentation).
///
/// `r` and `phi_max` default relative to the box side (`0.06*l` and
/// `0.02*l`), `infected_count` to 5% of `n` (at least one agent). The
/// default radius is chosen so that, at the default `h` and `beta`, node
/// degrees stay within the well-posedness row-sum budget with margin;
/// larger radii quickly violate it (see `validity_guaranteed`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    /// Box side length.
    pub l: f64,
    /// Box center.
    pub z_c: [f64; 2],
    /// Connection radius; `None` means `0.06 * l`.
    pub r: Option<f64>,
    /// Max drift magnitude per dimension; `None` means `0.02 * l`.
    pub phi_max: Option<f64>,
    pub self_loops: bool,
    /// Initially fully-infected agents; `None` means `ceil(0.05 * n)`.
    pub infected_count: Option<usize>,
    pub horizon: usize,
    pub seed: u64,
    pub controller: ControllerChoice,
    pub eta: f64,
    pub boundary_rule: BoundaryRule,
    /// Record `rho(M(k))` every this many steps; `None` means 1 for
    /// `n <= 200` and 10 above.
    pub rho_stride: Option<usize>,
    /// Emit per-node columns `x_0..x_{n-1}` in the trajectory CSV.
    pub per_node_columns: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: 1,
            n: 100,
            h: 0.1,
            beta: 1.0,
            l: 1.0,
            z_c: [0.0, 0.0],
            r: None,
            phi_max: None,
            self_loops: true,
            infected_count: None,
            horizon: 2000,
            seed: 1,
            controller: ControllerChoice::None,
            eta: 0.01,
            boundary_rule: BoundaryRule::Reflect,
            rho_stride: None,
            per_node_columns: false,
        }
    }
}

impl ScenarioConfig {
    pub fn radius(&self) -> f64 {
        self.r.unwrap_or(0.06 * self.l)
    }

    pub fn drift_max(&self) -> f64 {
        self.phi_max.unwrap_or(0.02 * self.l)
    }

    pub fn infected(&self) -> usize {
        self.infected_count
            .unwrap_or_else(|| ((self.n as f64) * 0.05).ceil() as usize)
    }

    pub fn self_loop_weight(&self) -> f64 {
        if self.self_loops {
            1.0
        } else {
            0.0
        }
    }

    pub fn stride(&self) -> usize {
        self.rho_stride
            .unwrap_or(if self.n <= 200 { 1 } else { 10 })
            .max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected 1)",
                self.schema_version
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::Config(format!("l must be positive, got {}", self.l)));
        }
        if !(self.radius().is_finite() && self.radius() > 0.0) {
            return Err(Error::Config(format!(
                "r must be positive, got {}",
                self.radius()
            )));
        }
        let phi = self.drift_max();
        if !(phi.is_finite() && phi >= 0.0) {
            return Err(Error::Config(format!(
                "phi_max must be non-negative, got {phi}"
            )));
        }
        if phi > self.l {
            return Err(Error::Config(format!(
                "phi_max {phi} exceeds the box side {}; reflection assumes sub-box steps",
                self.l
            )));
        }
        if self.infected() > self.n {
            return Err(Error::Config(format!(
                "infected_count {} exceeds n = {}",
                self.infected(),
                self.n
            )));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::Config(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        Ok(())
    }

    /// A-priori well-posedness check against the worst possible degree
    /// (`n-1` neighbors plus the self-loop). When false, validity depends
    /// on the degrees actually realized and every consumed step is still
    /// validated at simulation time.
    pub fn validity_guaranteed(&self) -> bool {
        let worst_row = (self.n as f64 - 1.0) + self.self_loop_weight();
        self.h * self.beta * worst_row <= 1.0
    }
}

/// Deterministic scenario generator: advances mobility and materializes
/// one [`ModelStep`] per `k`.
pub struct MobilityScenario {
    mobility: MobilityState,
    graph: GraphConfig,
    infection: DVector<f64>,
    healing: DVector<f64>,
    h: f64,
    next_k: usize,
}

impl MobilityScenario {
    pub fn mobility(&self) -> &MobilityState {
        &self.mobility
    }

    pub fn graph_config(&self) -> &GraphConfig {
        &self.graph
    }

    /// Uncontrolled healing rates the scenario was initialized with.
    pub fn healing_rates(&self) -> &DVector<f64> {
        &self.healing
    }
}

impl StepSource for MobilityScenario {
    fn n(&self) -> usize {
        self.mobility.n()
    }

    fn h(&self) -> f64 {
        self.h
    }

    fn make_step(&mut self, k: usize) -> Result<ModelStep> {
        if k != self.next_k {
            return Err(Error::Config(format!(
                "scenario steps must be generated sequentially: expected k = {}, got {k}",
                self.next_k
            )));
        }
        let a = build_adjacency(&self.mobility, &self.graph);
        let step = ModelStep::new(a, self.infection.clone(), self.healing.clone())?;
        self.mobility.advance();
        self.next_k += 1;
        Ok(step)
    }
}

/// Builds the initial mobility state, epidemic state, and step generator
/// from a config and seed. Deterministic: the same `(config, seed)` yields
/// bit-identical output.
///
/// Draw order from the seeded stream: positions, then drifts, then the
/// infected set, then the uncontrolled healing rates (uniform in `[0,1)`).
/// Infection rates are homogeneous at `beta`.
pub fn init_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<(MobilityScenario, EpidemicState)> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = cfg.l / 2.0;
    let positions: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                cfg.z_c[0] - half + cfg.l * rng.random::<f64>(),
                cfg.z_c[1] - half + cfg.l * rng.random::<f64>(),
            ]
        })
        .collect();
    let phi = cfg.drift_max();
    let drifts: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                -phi + 2.0 * phi * rng.random::<f64>(),
                -phi + 2.0 * phi * rng.random::<f64>(),
            ]
        })
        .collect();
    let infected = rand::seq::index::sample(&mut rng, n, cfg.infected());
    let healing = DVector::from_fn(n, |_, _| rng.random::<f64>());

    let mobility = MobilityState::new(positions, drifts, cfg.z_c, cfg.l, cfg.boundary_rule)?;
    let mut x = DVector::zeros(n);
    for i in infected.iter() {
        x[i] = 1.0;
    }
    let scenario = MobilityScenario {
        mobility,
        graph: GraphConfig {
            radius: cfg.radius(),
            self_loop_weight: cfg.self_loop_weight(),
        },
        infection: DVector::from_element(n, cfg.beta),
        healing,
        h: cfg.h,
        next_k: 0,
    };
    Ok((scenario, EpidemicState::new(x, 0)?))
}

/// Materializes `horizon` steps of a scenario into a [`ModelSequence`].
/// Memory grows as `horizon * n^2`; intended for desk-scale analysis.
pub fn materialize(
    cfg: &ScenarioConfig,
    seed: u64,
    horizon: usize,
) -> Result<(ModelSequence, EpidemicState)> {
    let (mut scenario, x0) = init_scenario(cfg, seed)?;
    let mut steps = Vec::with_capacity(horizon);
    for k in 0..horizon.max(1) {
        steps.push(scenario.make_step(k)?);
    }
    Ok((ModelSequence::new(steps, cfg.h)?, x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_agent(z: [f64; 2], phi: [f64; 2], side: f64) -> MobilityState {
        MobilityState::new(vec![z], vec![phi], [0.0, 0.0], side, BoundaryRule::Reflect).unwrap()
    }

    #[test]
    fn reflection_folds_overshoot_and_flips_drift() {
        // Box [-1,1]^2: 0.95 + 0.1 overshoots to 1.05, reflects to 0.95.
        let mob = single_agent([0.95, 0.5], [0.1, -0.2], 2.0);
        let next = mobility_step(&mob);
        assert!((next.positions[0][0] - 0.95).abs() < 1e-12);
        assert!((next.positions[0][1] - 0.3).abs() < 1e-12);
        assert!((next.drifts[0][0] + 0.1).abs() < 1e-15);
        assert!((next.drifts[0][1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn stationary_agent_is_fixed() {
        let mob = single_agent([0.3, -0.4], [0.0, 0.0], 2.0);
        let next = mobility_step(&mob);
        assert_eq!(next.positions, mob.positions);
        assert_eq!(next.drifts, mob.drifts);
    }

    #[test]
    fn boundary_agent_with_inward_drift_moves_in_without_flip() {
        let mob = single_agent([1.0, 0.0], [-0.25, 0.0], 2.0);
        let next = mobility_step(&mob);
        assert!((next.positions[0][0] - 0.75).abs() < 1e-15);
        assert_eq!(next.drifts[0][0], -0.25);
    }

    #[test]
    fn equality_flip_only_fires_on_exact_boundary() {
        let mut mob = single_agent([1.0, 0.0], [0.25, 0.0], 2.0);
        mob.rule = BoundaryRule::EqualityFlip;
        let next = mobility_step(&mob);
        // Position escapes (literal rule), drift flips because z was on the wall.
        assert!((next.positions[0][0] - 1.25).abs() < 1e-15);
        assert_eq!(next.drifts[0][0], -0.25);
    }

    #[test]
    fn rejects_super_box_drift() {
        let err = MobilityState::new(
            vec![[0.0, 0.0]],
            vec![[3.0, 0.0]],
            [0.0, 0.0],
            2.0,
            BoundaryRule::Reflect,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn box_invariance_long_run() {
        // 1e5 steps across 50 seeded drift/position draws, exact containment.
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2;
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5)])
                .collect();
            let drifts: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(-0.05..=0.05),
                        rng.random_range(-0.05..=0.05),
                    ]
                })
                .collect();
            let mut mob =
                MobilityState::new(positions, drifts, [0.0, 0.0], 1.0, BoundaryRule::Reflect)
                    .unwrap();
            for _ in 0..100_000 {
                mob.advance();
                for z in &mob.positions {
                    assert!(z[0].abs() <= 0.5 && z[1].abs() <= 0.5);
                }
            }
        }
    }

    #[test]
    fn adjacency_complete_at_diameter_radius() {
        let mob = MobilityState::new(
            vec![[-0.5, -0.5], [0.5, 0.5], [0.0, 0.0]],
            vec![[0.0; 2]; 3],
            [0.0, 0.0],
            1.0,
            BoundaryRule::Reflect,
        )
        .unwrap();
        let a = build_adjacency(
            &mob,
            &GraphConfig {
                radius: 2.0f64.sqrt(),
                self_loop_weight: 1.0,
            },
        );
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[(i, j)], 1.0);
            }
        }
    }

    #[test]
    fn adjacency_empty_below_min_distance() {
        let mob = MobilityState::new(
            vec![[-0.4, 0.0], [0.4, 0.0]],
            vec![[0.0; 2]; 2],
            [0.0, 0.0],
            1.0,
            BoundaryRule::Reflect,
        )
        .unwrap();
        let a = build_adjacency(
            &mob,
            &GraphConfig {
                radius: 0.1,
                self_loop_weight: 0.0,
            },
        );
        assert_eq!(a, DMatrix::zeros(2, 2));
    }

    #[test]
    fn adjacency_collinear_path_graph() {
        // Three collinear points spaced exactly r apart: 1-2 and 2-3 edges
        // only.
        let r = 0.25;
        let mob = MobilityState::new(
            vec![[-r, 0.0], [0.0, 0.0], [r, 0.0]],
            vec![[0.0; 2]; 3],
            [0.0, 0.0],
            1.0,
            BoundaryRule::Reflect,
        )
        .unwrap();
        let a = build_adjacency(
            &mob,
            &GraphConfig {
                radius: r,
                self_loop_weight: 0.0,
            },
        );
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 2)], 1.0);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn irreducible_examples() {
        let pair = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(is_irreducible(&pair));
        let blocks = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 1.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 1.0, //
                0.0, 0.0, 1.0, 1.0,
            ],
        );
        assert!(!is_irreducible(&blocks));
        let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        assert!(is_irreducible(&cycle));
        // One-way edge: reachable forward, not backward.
        let one_way = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(!is_irreducible(&one_way));
    }

    /// Union-find connectivity oracle for symmetric patterns.
    fn connected_oracle(a: &DMatrix<f64>) -> bool {
        let n = a.nrows();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                }
            }
        }
        let root = find(&mut parent, 0);
        (0..n).all(|i| find(&mut parent, i) == root)
    }

    #[test]
    fn irreducibility_matches_union_find_on_random_symmetric_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let n = rng.random_range(1..=50usize);
            let p = rng.random_range(0.0..0.2f64);
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p {
                        a[(i, j)] = 1.0;
                        a[(j, i)] = 1.0;
                    }
                }
            }
            assert_eq!(is_irreducible(&a), connected_oracle(&a));
        }
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = ScenarioConfig {
            n: 40,
            horizon: 5,
            ..ScenarioConfig::default()
        };
        let (mut s1, x1) = init_scenario(&cfg, 7).unwrap();
        let (mut s2, x2) = init_scenario(&cfg, 7).unwrap();
        assert_eq!(x1.x, x2.x);
        for k in 0..5 {
            let a = s1.make_step(k).unwrap();
            let b = s2.make_step(k).unwrap();
            assert_eq!(a.adjacency, b.adjacency);
            assert_eq!(a.healing_rates, b.healing_rates);
        }
    }

    #[test]
    fn zero_infected_gives_healthy_start() {
        let cfg = ScenarioConfig {
            n: 10,
            infected_count: Some(0),
            ..ScenarioConfig::default()
        };
        let (_, x0) = init_scenario(&cfg, 3).unwrap();
        assert!(x0.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_many_infected_is_a_config_error() {
        let cfg = ScenarioConfig {
            n: 10,
            infected_count: Some(11),
            ..ScenarioConfig::default()
        };
        assert!(matches!(init_scenario(&cfg, 3), Err(Error::Config(_))));
    }

    #[test]
    fn large_scenario_constructible() {
        let cfg = ScenarioConfig {
            n: 1000,
            beta: 1.0,
            r: Some(0.019),
            ..ScenarioConfig::default()
        };
        let (mut s, x0) = init_scenario(&cfg, 1).unwrap();
        assert_eq!(x0.n(), 1000);
        assert_eq!(x0.x.iter().filter(|&&v| v == 1.0).count(), 50);
        let step = s.make_step(0).unwrap();
        assert_eq!(step.n(), 1000);
    }

    #[test]
    fn generated_steps_pass_assumptions_when_budget_allows() {
        // Small n so the a-priori bound h*beta*n <= 1 genuinely holds.
        let cfg = ScenarioConfig {
            n: 9,
            h: 0.1,
            beta: 1.0,
            r: Some(0.3),
            ..ScenarioConfig::default()
        };
        assert!(cfg.validity_guaranteed());
        let (seq, _) = materialize(&cfg, 11, 50).unwrap();
        assert!(seq.well_posed());
    }
}
