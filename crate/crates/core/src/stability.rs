//! Executable stability certificates for the healthy state.
//!
//! Two sufficient conditions are checked numerically over a finite
//! horizon:
//!
//! - homogeneous infection rates + symmetric interconnections + pointwise
//!   `rho(M(k)) < 1` (checked per step);
//! - heterogeneous/directed systems whose state matrices vary slowly:
//!   `alpha1 < 1`, a uniform norm bound `L`, and step-to-step variation
//!   `kappa` below the explicit threshold from the slow-variation
//!   constants.
//!
//! Both proofs rest on a Lyapunov function decreasing along trajectories
//! (`x'x/2` in the first case, `x'Q(k)x` with `Q` from the discrete
//! Lyapunov equation in the second); the matching verifiers replay a
//! trajectory and confirm the decrease and the sandwich bounds step by
//! step. Strict inequalities are certified with a configurable margin to
//! stay off floating-point knife edges; the margin is always reported.

use nalgebra::DMatrix;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{check_assumptions, state_matrix_with_healing, ModelSequence};
use crate::spectral::{
    slow_variation_constants, solve_discrete_lyapunov, spectral_radius, SlowVariationConstants,
};

/// Default strictness margin: `rho < 1` is certified as `rho <= 1 - margin`.
pub const DEFAULT_RHO_MARGIN: f64 = 1e-9;

/// Tolerance for the homogeneity and symmetry premise checks.
const PREMISE_TOL: f64 = 1e-12;

/// Positive Lyapunov increments above this are flagged as violations.
pub const DECREASE_TOL: f64 = 1e-12;

/// Relative slop allowed on the sandwich inequalities (solver residuals).
const SANDWICH_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Homogeneous rates over symmetric graphs, pointwise spectral radius.
    HomogeneousSymmetric,
    /// Heterogeneous directed spread under slow variation.
    SlowVariation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    PremisesHold,
    PremisesFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Premise {
    HomogeneousInfectionRates,
    SymmetricAdjacency,
    SpectralRadiusBelowOne,
    SlowVariation,
}

impl std::fmt::Display for Premise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Premise::HomogeneousInfectionRates => "homogeneous infection rates",
            Premise::SymmetricAdjacency => "symmetric adjacency",
            Premise::SpectralRadiusBelowOne => "spectral radius below one",
            Premise::SlowVariation => "variation below threshold",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct FailedPremise {
    pub premise: Premise,
    pub k: Option<usize>,
    pub node: Option<usize>,
    pub detail: String,
}

/// Outcome of a certificate check.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub theorem: Theorem,
    pub verdict: Verdict,
    pub failed_premises: Vec<FailedPremise>,
    /// Slow-variation constants (always present for that certificate).
    pub constants: Option<SlowVariationConstants>,
    /// `rho(M(k))` for every step of the horizon.
    pub rho_series: Vec<f64>,
    pub max_rho: f64,
    /// The strictness margin used for `rho < 1`.
    pub rho_margin: f64,
}

impl CertificateReport {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::PremisesHold
    }
}

fn certificate_rho_series(seq: &ModelSequence) -> Result<(Vec<f64>, f64)> {
    let mut series = Vec::with_capacity(seq.len());
    let mut max_rho = 0.0f64;
    for step in seq.steps() {
        let m = state_matrix_with_healing(step, seq.h(), None);
        let rho = spectral_radius(&m)?;
        max_rho = max_rho.max(rho);
        series.push(rho);
    }
    Ok((series, max_rho))
}

fn gate_assumptions(seq: &ModelSequence) -> Result<()> {
    let report = check_assumptions(seq);
    match report.failures.first() {
        Some(f) => Err(f.to_error()),
        None => Ok(()),
    }
}

/// Certificate for homogeneous rates over symmetric graphs.
///
/// Premises per step: all `beta_i(k)` equal, `A(k)` symmetric, and
/// `rho(M(k)) <= 1 - margin`. A failed model assumption is a structural
/// error, not a failed premise.
pub fn check_theorem1(seq: &ModelSequence) -> Result<CertificateReport> {
    check_theorem1_with(seq, DEFAULT_RHO_MARGIN)
}

pub fn check_theorem1_with(seq: &ModelSequence, rho_margin: f64) -> Result<CertificateReport> {
    gate_assumptions(seq)?;
    let mut failed = Vec::new();
    for (k, step) in seq.steps().iter().enumerate() {
        let beta0 = step.infection_rates[0];
        for (i, &b) in step.infection_rates.iter().enumerate() {
            if (b - beta0).abs() > PREMISE_TOL {
                failed.push(FailedPremise {
                    premise: Premise::HomogeneousInfectionRates,
                    k: Some(k),
                    node: Some(i),
                    detail: format!("beta_{i} = {b} differs from beta_0 = {beta0}"),
                });
                break;
            }
        }
        let n = step.n();
        'sym: for i in 0..n {
            for j in (i + 1)..n {
                let d = (step.adjacency[(i, j)] - step.adjacency[(j, i)]).abs();
                if d > PREMISE_TOL {
                    failed.push(FailedPremise {
                        premise: Premise::SymmetricAdjacency,
                        k: Some(k),
                        node: None,
                        detail: format!("|a_{i}{j} - a_{j}{i}| = {d:.3e}"),
                    });
                    break 'sym;
                }
            }
        }
    }
    let (rho_series, max_rho) = certificate_rho_series(seq)?;
    for (k, &rho) in rho_series.iter().enumerate() {
        if rho > 1.0 - rho_margin {
            failed.push(FailedPremise {
                premise: Premise::SpectralRadiusBelowOne,
                k: Some(k),
                node: None,
                detail: format!("rho(M({k})) = {rho:.12} > 1 - {rho_margin:.1e}"),
            });
        }
    }
    let verdict = if failed.is_empty() {
        Verdict::PremisesHold
    } else {
        Verdict::PremisesFail
    };
    Ok(CertificateReport {
        theorem: Theorem::HomogeneousSymmetric,
        verdict,
        failed_premises: failed,
        constants: None,
        rho_series,
        max_rho,
        rho_margin,
    })
}

/// Certificate for heterogeneous directed spread under slow variation.
///
/// Computes the slow-variation constants for the given `epsilon` and
/// checks: (i) `alpha1 <= 1 - margin`, (ii) the norm bound `L` (always
/// finite over a finite horizon; reported, never failing), and (iii)
/// `kappa <= kappa_threshold`. The constants are carried in the report
/// even when a premise fails.
pub fn check_theorem2(seq: &ModelSequence, epsilon: f64) -> Result<CertificateReport> {
    check_theorem2_with(seq, epsilon, DEFAULT_RHO_MARGIN)
}

pub fn check_theorem2_with(
    seq: &ModelSequence,
    epsilon: f64,
    rho_margin: f64,
) -> Result<CertificateReport> {
    gate_assumptions(seq)?;
    let ms = seq.state_matrices();
    let consts = slow_variation_constants(&ms, epsilon)?;
    let rho_series: Vec<f64> = {
        let mut v = Vec::with_capacity(ms.len());
        for m in &ms {
            v.push(spectral_radius(m)?);
        }
        v
    };
    let max_rho = rho_series.iter().fold(0.0f64, |a, &b| a.max(b));

    let mut failed = Vec::new();
    if consts.alpha1 > 1.0 - rho_margin {
        failed.push(FailedPremise {
            premise: Premise::SpectralRadiusBelowOne,
            k: rho_series.iter().position(|&r| r > 1.0 - rho_margin),
            node: None,
            detail: format!("alpha1 = {:.12} > 1 - {rho_margin:.1e}", consts.alpha1),
        });
    } else if consts.kappa > consts.kappa_threshold {
        failed.push(FailedPremise {
            premise: Premise::SlowVariation,
            k: None,
            node: None,
            detail: format!(
                "kappa = {:.6e} exceeds threshold {:.6e} (log10 threshold {:.2})",
                consts.kappa,
                consts.kappa_threshold,
                consts.log_kappa_threshold / std::f64::consts::LN_10
            ),
        });
    }
    let verdict = if failed.is_empty() {
        Verdict::PremisesHold
    } else {
        Verdict::PremisesFail
    };
    Ok(CertificateReport {
        theorem: Theorem::SlowVariation,
        verdict,
        failed_premises: failed,
        constants: Some(consts),
        rho_series,
        max_rho,
        rho_margin,
    })
}

/// Per-step Lyapunov record.
#[derive(Debug, Clone, Copy)]
pub struct DecreaseEntry {
    pub k: usize,
    /// `V(k, x(k))`.
    pub v: f64,
    /// `V(k+1, x(k+1)) - V(k, x(k))`.
    pub delta_v: f64,
    /// Lower sandwich value `||x(k)||^2` (slow-variation verifier only).
    pub sandwich_lo: Option<f64>,
    /// Upper sandwich value `m^2/(1-p^2) ||x(k)||^2`.
    pub sandwich_hi: Option<f64>,
}

/// Replayed Lyapunov-decrease evidence along a trajectory.
#[derive(Debug, Clone)]
pub struct DecreaseReport {
    pub entries: Vec<DecreaseEntry>,
    /// Steps where `delta_v` exceeded the tolerance with `x(k) != 0`.
    pub violations: Vec<usize>,
    /// Steps where a sandwich inequality failed.
    pub sandwich_violations: Vec<usize>,
    pub max_delta_v: f64,
    pub tolerance: f64,
}

impl DecreaseReport {
    pub fn decrease_holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn sandwich_holds(&self) -> bool {
        self.sandwich_violations.is_empty()
    }
}

/// Verifies `V = x'x/2` decreases along a trajectory.
///
/// Informational when the certificate premises fail (positive increments
/// may legitimately occur); under premises that hold, any increment above
/// the tolerance is a violation.
pub fn verify_lyapunov_decrease_t1(traj: &Trajectory, seq: &ModelSequence) -> DecreaseReport {
    let steps = traj.horizon().min(seq.len());
    let mut entries = Vec::with_capacity(steps);
    let mut violations = Vec::new();
    let mut max_delta_v = f64::NEG_INFINITY;
    for k in 0..steps {
        let v_now = 0.5 * traj.state_norm[k] * traj.state_norm[k];
        let v_next = 0.5 * traj.state_norm[k + 1] * traj.state_norm[k + 1];
        let delta_v = v_next - v_now;
        max_delta_v = max_delta_v.max(delta_v);
        if traj.state_norm[k] > 0.0 && delta_v > DECREASE_TOL {
            violations.push(k);
        }
        entries.push(DecreaseEntry {
            k,
            v: v_now,
            delta_v,
            sandwich_lo: None,
            sandwich_hi: None,
        });
    }
    DecreaseReport {
        entries,
        violations,
        sandwich_violations: Vec::new(),
        max_delta_v,
        tolerance: DECREASE_TOL,
    }
}

/// Verifies the slow-variation Lyapunov function `V(k,x) = x'Q(k)x` along a
/// trajectory: the sandwich `||x||^2 <= V <= m^2/(1-p^2) ||x||^2` and the
/// decrease `V(k+1) - V(k) <= 0` for `x(k) != 0`.
///
/// `Q(k+1)` solves the equation built from `M(k)`; the paper leaves `Q(0)`
/// open, so `Q(0) := Q(1)` (equivalently `M(-1) := M(0)`), which keeps the
/// step-0 decrease argument intact. A solve failure is a structural error
/// naming the step.
pub fn verify_lyapunov_decrease_t2(
    traj: &Trajectory,
    seq: &ModelSequence,
    consts: &SlowVariationConstants,
) -> Result<DecreaseReport> {
    let steps = traj.horizon().min(seq.len());
    if steps == 0 {
        return Ok(DecreaseReport {
            entries: Vec::new(),
            violations: Vec::new(),
            sandwich_violations: Vec::new(),
            max_delta_v: f64::NEG_INFINITY,
            tolerance: DECREASE_TOL,
        });
    }
    // Q(k+1) from M(k), honoring controller-applied healing if present.
    let mut qs: Vec<DMatrix<f64>> = Vec::with_capacity(steps + 1);
    for k in 0..steps {
        let healing = traj.applied_healing.as_ref().map(|d| &d[k]);
        let m = state_matrix_with_healing(seq.step(k), seq.h(), healing);
        let sol = solve_discrete_lyapunov(&m).map_err(|e| Error::LyapunovAtStep {
            k,
            source: Box::new(e),
        })?;
        qs.push(sol.q);
    }
    // Q(0) := Q(1).
    qs.insert(0, qs[0].clone());

    let upper_coef = (2.0 * consts.log_m_coef - (1.0 - consts.p * consts.p).ln()).exp();
    let mut entries = Vec::with_capacity(steps);
    let mut violations = Vec::new();
    let mut sandwich_violations = Vec::new();
    let mut max_delta_v = f64::NEG_INFINITY;
    let value = |k: usize| -> f64 {
        let x = &traj.states[k].x;
        (x.transpose() * &qs[k] * x)[(0, 0)]
    };
    for k in 0..steps {
        let v_now = value(k);
        let v_next = value(k + 1);
        let delta_v = v_next - v_now;
        max_delta_v = max_delta_v.max(delta_v);
        let norm_sq = traj.state_norm[k] * traj.state_norm[k];
        let lo = norm_sq;
        let hi = upper_coef * norm_sq;
        if v_now < lo * (1.0 - SANDWICH_REL_TOL) || v_now > hi * (1.0 + SANDWICH_REL_TOL) {
            sandwich_violations.push(k);
        }
        if traj.state_norm[k] > 0.0 && delta_v > DECREASE_TOL {
            violations.push(k);
        }
        entries.push(DecreaseEntry {
            k,
            v: v_now,
            delta_v,
            sandwich_lo: Some(lo),
            sandwich_hi: Some(hi),
        });
    }
    Ok(DecreaseReport {
        entries,
        violations,
        sandwich_violations,
        max_delta_v,
        tolerance: DECREASE_TOL,
    })
}
