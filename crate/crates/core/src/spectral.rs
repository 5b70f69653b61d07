//! Spectral kernels shared by the stability certificates.
//!
//! Provides the spectral radius, the induced 2-norm, a fixed-point solver
//! for the discrete Lyapunov equation `M' Q M - Q = -I`, and the
//! slow-variation constants
//!
//! ```text
//! mu = (1 - alpha1)/2,   p = 1 - mu,
//! m  = (1 - mu)(1 - mu + L)^(n-1) / mu^n,
//! kappa_threshold = (1 - p^2)^2 (1 - eps) / (2 m^4 L)
//! ```
//!
//! together with a numerical verifier for the three bound families they
//! imply: `||M(k)^F|| <= m p^F`, `||Q(k+1)|| <= m^2/(1-p^2)` and
//! `||Q(k+1)-Q(k)|| <= 2 kappa m^4 L / (1-p^2)^2`. All norms are the
//! induced 2-norm. The constants grow so fast in `n` that realistic
//! thresholds are extremely small; they are computed in log space and the
//! log is carried alongside the (possibly underflowed) linear value.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::error::{Error, Result};

/// Relative tolerance targeted by the spectral-radius iterations.
const RHO_REL_TOL: f64 = 1e-11;
/// Residual tolerance for the Lyapunov fixed point (contract is 1e-10).
const LYAP_TOL: f64 = 1e-11;
const LYAP_MAX_ITER: usize = 500_000;

fn require_square(m: &DMatrix<f64>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn require_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.into()));
    }
    Ok(())
}

/// Max absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let tol = 1e-12 * max_abs(m).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Gershgorin-style upper bound on the spectral radius:
/// `min(max abs row sum, max abs column sum)`.
pub fn gershgorin_bound(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut row_max = 0.0f64;
    let mut col_max = 0.0f64;
    for i in 0..n {
        row_max = row_max.max(m.row(i).iter().map(|v| v.abs()).sum());
        col_max = col_max.max(m.column(i).iter().map(|v| v.abs()).sum());
    }
    row_max.min(col_max)
}

fn symmetric_rho(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Spectral radius of a real square matrix.
///
/// Symmetric inputs take an exact symmetric eigen-path. Everything else
/// runs power iteration with seeded random restarts; if the dominant
/// eigenvalue is a complex pair (no convergence), the estimate falls back
/// to Gelfand's formula evaluated by repeated squaring, which converges
/// for any matrix. The Gershgorin bound caps the result as a sanity check.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = require_square(m, "matrix")?;
    require_finite(m, "matrix")?;
    if n == 0 {
        return Ok(0.0);
    }
    if n == 1 {
        return Ok(m[(0, 0)].abs());
    }
    let cap = gershgorin_bound(m);
    if cap == 0.0 {
        return Ok(0.0);
    }
    if is_symmetric(m) {
        return Ok(symmetric_rho(m).min(cap));
    }

    let mut best: Option<f64> = None;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
    for _restart in 0..4 {
        let mut v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0f64));
        let nv = v.norm();
        if nv == 0.0 {
            continue;
        }
        v /= nv;
        for _ in 0..1500 {
            let w = m * &v;
            let lambda = v.dot(&w);
            let resid = (&w - lambda * &v).norm();
            if resid <= RHO_REL_TOL * lambda.abs().max(1e-3 * cap) {
                let cand = lambda.abs();
                best = Some(best.map_or(cand, |b: f64| b.max(cand)));
                break;
            }
            let nw = w.norm();
            if nw == 0.0 {
                // v lies in the kernel; zero is an exact eigenvalue here.
                best = Some(best.unwrap_or(0.0));
                break;
            }
            v = w / nw;
        }
    }

    // Power iteration certifies proximity to *an* eigenvalue; the repeated
    // squaring estimate targets the dominant one. Take the larger.
    let gelfand = gelfand_rho(m, cap)?;
    let rho = best.map_or(gelfand, |b| b.max(gelfand));
    Ok(rho.min(cap))
}

/// Gelfand's formula `rho = lim ||M^F||^(1/F)` with `F = 2^j`, tracking the
/// scale in log space to dodge overflow/underflow.
fn gelfand_rho(m: &DMatrix<f64>, cap: f64) -> Result<f64> {
    let mut u = m / cap;
    let s0 = u.norm(); // Frobenius
    if s0 == 0.0 {
        return Ok(0.0);
    }
    u /= s0;
    let mut log_scale = s0.ln();
    let mut estimate = cap * (log_scale.exp()); // j = 0
    let mut stable_rounds = 0;
    for j in 1..=64u32 {
        let w = &u * &u;
        let s = w.norm();
        if s == 0.0 {
            // Nilpotent to machine precision.
            return Ok(0.0);
        }
        u = w / s;
        log_scale = 2.0 * log_scale + s.ln();
        let next = cap * (log_scale / f64::powi(2.0, j as i32)).exp();
        if !next.is_finite() {
            return Err(Error::SpectralNoConvergence {
                lower: 0.0,
                upper: cap,
            });
        }
        if (next - estimate).abs() <= 1e-13 * next.max(f64::MIN_POSITIVE) {
            stable_rounds += 1;
            if stable_rounds >= 2 {
                return Ok(next);
            }
        } else {
            stable_rounds = 0;
        }
        estimate = next;
    }
    Ok(estimate)
}

/// Induced 2-norm, computed as `sqrt(lambda_max(M' M))`.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let lmax = gram
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(*v));
    lmax.max(0.0).sqrt()
}

/// Spectral-radius tracker for the per-step `rho(M(k))` series.
///
/// Consecutive state matrices often repeat exactly: past controller
/// saturation `M(k) = h B A(k)` changes only when proximity edges flip,
/// and healing ramps freeze node by node. The tracker therefore memoizes
/// the last matrix and its spectral radius and recomputes (exact
/// symmetric eigensolve, or the general routine for an asymmetric input)
/// only when the matrix actually changed. Gated power iteration is the
/// wrong tool here: sparse proximity graphs routinely carry
/// near-degenerate top eigenvalue clusters across disconnected
/// components, where the iteration stalls or, worse, certifies a
/// sub-dominant component's eigenpair.
pub struct RhoTracker {
    prev: Option<(DMatrix<f64>, f64)>,
}

impl RhoTracker {
    pub fn new(_n: usize) -> Self {
        Self { prev: None }
    }

    pub fn rho(&mut self, m: &DMatrix<f64>) -> Result<f64> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(
                "rho tracker needs a square matrix".into(),
            ));
        }
        if let Some((pm, pr)) = &self.prev {
            if pm == m {
                return Ok(*pr);
            }
        }
        let value = if is_symmetric(m) {
            symmetric_rho(m)
        } else {
            spectral_radius(m)?
        };
        self.prev = Some((m.clone(), value));
        Ok(value)
    }
}

/// Solution of `M' Q M - Q = -I` with its certificate data.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    /// Symmetric, positive definite, `Q >= I`.
    pub q: DMatrix<f64>,
    /// `max_abs(M' Q M - Q + I)` of the returned `Q`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves the discrete Lyapunov equation by the fixed point
/// `Q <- I + M' Q M`, i.e. by accumulating the series
/// `Q = I + sum_{j>=1} (M')^j M^j`.
///
/// Requires `rho(M) < 1`; refuses otherwise, since no positive definite
/// solution exists in that case.
pub fn solve_discrete_lyapunov(m: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let n = require_square(m, "matrix")?;
    require_finite(m, "matrix")?;
    let rho = spectral_radius(m)?;
    if rho >= 1.0 {
        return Err(Error::LyapunovUnstable { rho });
    }
    let mt = m.transpose();
    let identity = DMatrix::<f64>::identity(n, n);
    let mut q = identity.clone();
    let mut iterations = 0usize;
    loop {
        // r = M' Q M - Q + I: both the equation residual and the next
        // fixed-point increment.
        let r = &mt * &q * m - &q + &identity;
        let rmax = max_abs(&r);
        if rmax <= LYAP_TOL {
            // Enforce exact symmetry before reporting.
            let qs = (&q + &q.transpose()) * 0.5;
            let final_res = max_abs(&(&mt * &qs * m - &qs + &identity));
            return Ok(LyapunovSolution {
                q: qs,
                residual: final_res,
                iterations,
            });
        }
        q += r;
        iterations += 1;
        if iterations > LYAP_MAX_ITER {
            return Err(Error::LyapunovNoConvergence {
                iterations,
                residual: rmax,
            });
        }
    }
}

/// Constants for the slowly-varying stability argument, observed over a
/// finite horizon (no infinite-horizon supremum is claimed).
#[derive(Debug, Clone)]
pub struct SlowVariationConstants {
    /// `max_k rho(M(k))` over the horizon.
    pub alpha1: f64,
    /// `(1 - alpha1)/2`; in `(0, 1/2]` when `alpha1 < 1`, NaN otherwise.
    pub mu: f64,
    /// `1 - mu`.
    pub p: f64,
    /// `max_k ||M(k)||_2`.
    pub l_max: f64,
    /// Coefficient `m` of the power bound `||M^F|| <= m p^F`. May overflow
    /// to infinity for large `n`; `log_m_coef` stays finite.
    pub m_coef: f64,
    pub log_m_coef: f64,
    pub epsilon: f64,
    /// `max_k ||M(k+1) - M(k)||_2`; 0 when only one matrix was observed.
    pub kappa: f64,
    /// `(1-p^2)^2 (1-eps) / (2 m^4 L)`. May underflow to 0 (or be infinite
    /// when `L = 0`); `log_kappa_threshold` stays informative.
    pub kappa_threshold: f64,
    pub log_kappa_threshold: f64,
    /// Number of matrices the constants were computed from.
    pub steps: usize,
    /// `alpha1 < 1`; when false the derived constants are NaN.
    pub stable: bool,
    /// False when the sequence had a single element (no difference observed).
    pub variation_observed: bool,
}

/// Computes the slow-variation constants from a finite sequence of state
/// matrices. `epsilon` must lie in `(0,1)`. When `alpha1 >= 1` the
/// constants are still returned, flagged via `stable = false`.
pub fn slow_variation_constants(
    ms: &[DMatrix<f64>],
    epsilon: f64,
) -> Result<SlowVariationConstants> {
    if ms.is_empty() {
        return Err(Error::InsufficientData("no state matrices given".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    let n = ms[0].nrows();
    for (k, m) in ms.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "matrix {k} is {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
    }

    let mut alpha1 = 0.0f64;
    let mut l_max = 0.0f64;
    for m in ms {
        alpha1 = alpha1.max(spectral_radius(m)?);
        l_max = l_max.max(spectral_norm(m));
    }
    let mut kappa = 0.0f64;
    for w in ms.windows(2) {
        kappa = kappa.max(spectral_norm(&(&w[1] - &w[0])));
    }
    let variation_observed = ms.len() > 1;

    let stable = alpha1 < 1.0;
    let (mu, p, m_coef, log_m_coef, kappa_threshold, log_kappa_threshold) = if stable {
        let mu = (1.0 - alpha1) / 2.0;
        let p = 1.0 - mu;
        let log_m =
            (1.0 - mu).ln() + (n as f64 - 1.0) * (1.0 - mu + l_max).ln() - n as f64 * mu.ln();
        let log_thr = 2.0 * (1.0 - p * p).ln() + (1.0 - epsilon).ln()
            - std::f64::consts::LN_2
            - 4.0 * log_m
            - l_max.ln();
        (mu, p, log_m.exp(), log_m, log_thr.exp(), log_thr)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };

    Ok(SlowVariationConstants {
        alpha1,
        mu,
        p,
        l_max,
        m_coef,
        log_m_coef,
        epsilon,
        kappa,
        kappa_threshold,
        log_kappa_threshold,
        steps: ms.len(),
        stable,
        variation_observed,
    })
}

/// Which proven inequality a [`BoundCheck`] instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    /// `||M(k)^F||_2 <= m p^F`.
    MatrixPower,
    /// `||Q(k+1)||_2 <= m^2 / (1-p^2)`.
    LyapunovNorm,
    /// `||Q(k+1) - Q(k)||_2 <= 2 kappa m^4 L / (1-p^2)^2`.
    LyapunovDifference,
}

impl std::fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BoundFamily::MatrixPower => "matrix_power",
            BoundFamily::LyapunovNorm => "lyapunov_norm",
            BoundFamily::LyapunovDifference => "lyapunov_difference",
        };
        f.write_str(s)
    }
}

/// One evaluated inequality: `lhs <= rhs`, `slack = rhs - lhs`.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub family: BoundFamily,
    pub k: usize,
    /// Power `F` for the matrix-power family.
    pub f_power: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.slack >= 0.0
    }
}

/// Result of evaluating every bound instance over a matrix sequence.
///
/// These inequalities are theorems under the slow-variation premises, so a
/// negative slack indicates an implementation bug, not a property of the
/// model; it is reported as such rather than raised as an error.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// False when `alpha1 >= 1`: the premises fail and nothing is asserted.
    pub applicable: bool,
    pub checks: Vec<BoundCheck>,
    pub all_hold: bool,
    pub worst_slack: f64,
}

/// Evaluates the three proven bound families on `ms` for all `F <= f_max`.
///
/// `consts` must come from [`slow_variation_constants`] on the same
/// sequence. Geometric decay makes powers beyond ~64 uninformative at
/// double precision, hence the default cap.
pub const DEFAULT_F_MAX: u32 = 64;

pub fn verify_appendix_bounds(
    ms: &[DMatrix<f64>],
    consts: &SlowVariationConstants,
    f_max: u32,
) -> Result<BoundReport> {
    if ms.len() != consts.steps {
        return Err(Error::DimensionMismatch(format!(
            "constants were computed from {} matrices, got {}",
            consts.steps,
            ms.len()
        )));
    }
    if !consts.stable {
        return Ok(BoundReport {
            applicable: false,
            checks: Vec::new(),
            all_hold: true,
            worst_slack: f64::INFINITY,
        });
    }

    let mut checks = Vec::new();
    let log_p = consts.p.ln();
    for (k, m) in ms.iter().enumerate() {
        let mut power = m.clone();
        for f in 1..=f_max {
            if f > 1 {
                power = &power * m;
            }
            let lhs = spectral_norm(&power);
            let rhs = (consts.log_m_coef + f as f64 * log_p).exp();
            checks.push(BoundCheck {
                family: BoundFamily::MatrixPower,
                k,
                f_power: Some(f),
                lhs,
                rhs,
                slack: rhs - lhs,
            });
        }
    }

    // Q(k+1) solves the equation built from M(k).
    let mut qs = Vec::with_capacity(ms.len());
    for (k, m) in ms.iter().enumerate() {
        let sol = solve_discrete_lyapunov(m).map_err(|e| Error::LyapunovAtStep {
            k,
            source: Box::new(e),
        })?;
        qs.push(sol.q);
    }
    let one_minus_p2 = 1.0 - consts.p * consts.p;
    let q_rhs = (2.0 * consts.log_m_coef - one_minus_p2.ln()).exp();
    for (k, q) in qs.iter().enumerate() {
        let lhs = spectral_norm(q);
        checks.push(BoundCheck {
            family: BoundFamily::LyapunovNorm,
            k: k + 1,
            f_power: None,
            lhs,
            rhs: q_rhs,
            slack: q_rhs - lhs,
        });
    }
    if qs.len() > 1 {
        let diff_rhs = (std::f64::consts::LN_2
            + consts.kappa.ln()
            + 4.0 * consts.log_m_coef
            + consts.l_max.ln()
            - 2.0 * one_minus_p2.ln())
        .exp();
        // exp(-inf) = 0 covers kappa = 0 and L = 0 exactly.
        for k in 1..qs.len() {
            let lhs = spectral_norm(&(&qs[k] - &qs[k - 1]));
            checks.push(BoundCheck {
                family: BoundFamily::LyapunovDifference,
                k: k + 1,
                f_power: None,
                lhs,
                rhs: diff_rhs,
                slack: diff_rhs - lhs,
            });
        }
    }

    let all_hold = checks.iter().all(BoundCheck::holds);
    let worst_slack = checks.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        applicable: true,
        checks,
        all_hold,
        worst_slack,
    })
}
