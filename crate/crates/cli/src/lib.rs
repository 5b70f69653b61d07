//! Command implementations behind the `netsis` binary.
//!
//! Commands write their artifacts into an output directory and print a
//! short summary to stdout. All outputs are deterministic functions of the
//! configuration bytes and the seed: CSV numbers use Rust's shortest
//! round-trip float formatting and the SVG charts are rendered with fixed
//! layout, so repeated runs produce byte-identical files.

pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use netsis_core::dynamics::{
    fit_decay, simulate, simulate_source, ControllerHook, DecayFit, SimulateOptions, Trajectory,
};
use netsis_core::error::Error as CoreError;
use netsis_core::mitigation::{
    check_theorem3_hypotheses, check_theorem4_hypotheses, Controller, ControllerMode,
    ControllerState, ControllerTrace,
};
use netsis_core::model::check_assumptions;
use netsis_core::netgen::{init_scenario, materialize, ControllerChoice, ScenarioConfig};
use netsis_core::spectral::{slow_variation_constants, verify_appendix_bounds, BoundReport};
use netsis_core::stability::{
    check_theorem1_with, check_theorem2_with, verify_lyapunov_decrease_t1,
    verify_lyapunov_decrease_t2, CertificateReport, Verdict,
};

/// Exit codes: 0 success, 1 config error, 2 assumption violation,
/// 3 proven-bound violation.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(CoreError),
    Io(std::io::Error),
    /// A proven inequality failed numerically: implementation bug detector.
    BoundViolation(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::BoundViolation(msg) => write!(f, "proven bound violated: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::AssumptionViolated { .. })
            | CliError::Core(CoreError::StateOutOfRange { .. }) => 2,
            CliError::BoundViolation(_) => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Loads and validates a scenario config from TOML; parse errors keep the
/// line/column diagnostics from the parser.
pub fn load_config(path: &Path) -> CliResult<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScenarioConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// RFC-4180 field quoting: numbers never need it, labels might.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn build_controller(
    cfg: &ScenarioConfig,
    initial_healing: &netsis_core::nalgebra::DVector<f64>,
) -> CliResult<Option<Controller>> {
    let mode = match cfg.controller {
        ControllerChoice::None => return Ok(None),
        ControllerChoice::Centralized => ControllerMode::Centralized,
        ControllerChoice::Distributed => ControllerMode::Distributed,
    };
    let state = ControllerState::uniform(mode, cfg.n, cfg.eta, initial_healing, cfg.h)?;
    Ok(Some(Controller::with_trace(state)))
}

/// Artifacts and headline numbers from one simulation run.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub controller: ControllerChoice,
    pub seed: u64,
    pub horizon: usize,
    pub final_avg: f64,
    pub min_avg: f64,
    /// First step with average infection below 1e-6, if any.
    pub eradicated_at: Option<usize>,
    /// First step with every node saturated at 1/h, if any.
    pub saturated_at: Option<usize>,
    pub out_dir: PathBuf,
}

fn trajectory_csv(traj: &Trajectory, per_node: bool) -> String {
    let mut out = String::new();
    out.push_str("k,avg_infection,state_norm,rho_M");
    if per_node {
        let n = traj.states.first().map_or(0, |s| s.n());
        for i in 0..n {
            let _ = write!(out, ",x_{i}");
        }
    }
    out.push('\n');
    let mut rho_iter = traj.rho.iter().peekable();
    for (k, state) in traj.states.iter().enumerate() {
        let rho_here = match rho_iter.peek() {
            Some(&&(rk, r)) if rk == k => {
                rho_iter.next();
                Some(r)
            }
            _ => None,
        };
        let _ = write!(
            out,
            "{k},{:e},{:e},{}",
            traj.avg_infection[k],
            traj.state_norm[k],
            rho_here.map(|r| format!("{r:e}")).unwrap_or_default()
        );
        if per_node {
            for v in state.x.iter() {
                let _ = write!(out, ",{v:e}");
            }
        }
        out.push('\n');
    }
    out
}

fn rho_csv(traj: &Trajectory) -> String {
    let mut out = String::from("k,rho_M\n");
    for &(k, r) in &traj.rho {
        let _ = writeln!(out, "{k},{r:e}");
    }
    out
}

fn trace_csv(trace: &ControllerTrace) -> String {
    let mut out = String::from("k,node,gamma,psi,delta_hat,saturated\n");
    for row in &trace.rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{}",
            row.k,
            row.node,
            row.gamma,
            row.psi,
            row.delta_hat,
            u8::from(row.saturated)
        );
    }
    out
}

/// Runs one scenario and writes trajectory CSV, rho-series CSV, the
/// controller trace (when controlled), and the two SVG charts.
pub fn run_simulate(cfg: &ScenarioConfig, out_dir: &Path) -> CliResult<SimOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let (mut scenario, x0) = init_scenario(cfg, cfg.seed)?;
    let mut controller = build_controller(cfg, scenario.healing_rates())?;
    let traj = simulate_source(
        &mut scenario,
        cfg.horizon,
        &x0,
        controller.as_mut().map(|c| c as &mut dyn ControllerHook),
        SimulateOptions {
            rho_stride: Some(cfg.stride()),
            record_healing: false,
        },
    )?;

    write_file(
        out_dir,
        "trajectory.csv",
        &trajectory_csv(&traj, cfg.per_node_columns),
    )?;
    write_file(out_dir, "rho_series.csv", &rho_csv(&traj))?;
    if let Some(ctrl) = controller.as_mut() {
        if let Some(trace) = ctrl.take_trace() {
            write_file(out_dir, "controller_trace.csv", &trace_csv(&trace))?;
        }
    }

    let avg_points: Vec<(f64, f64)> = traj
        .avg_infection
        .iter()
        .enumerate()
        .map(|(k, &v)| (k as f64, v))
        .collect();
    write_file(
        out_dir,
        "avg_infection.svg",
        &svg::line_chart(
            &format!("Average infection level ({})", cfg.controller),
            "k",
            "average infection",
            &[svg::Series {
                name: "avg infection",
                points: &avg_points,
            }],
            None,
        ),
    )?;
    let rho_points: Vec<(f64, f64)> = traj.rho.iter().map(|&(k, r)| (k as f64, r)).collect();
    write_file(
        out_dir,
        "rho_m.svg",
        &svg::line_chart(
            &format!("Spectral radius of M(k) ({})", cfg.controller),
            "k",
            "rho(M(k))",
            &[svg::Series {
                name: "rho",
                points: &rho_points,
            }],
            Some(1.0),
        ),
    )?;

    let min_avg = traj
        .avg_infection
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let outcome = SimOutcome {
        controller: cfg.controller,
        seed: cfg.seed,
        horizon: cfg.horizon,
        final_avg: *traj.avg_infection.last().unwrap_or(&0.0),
        min_avg,
        eradicated_at: traj.avg_infection.iter().position(|&a| a < 1e-6),
        saturated_at: controller.as_ref().and_then(|c| c.saturated_at()),
        out_dir: out_dir.to_path_buf(),
    };
    Ok(outcome)
}

fn guard_materialization(cfg: &ScenarioConfig) -> CliResult<()> {
    let bytes = cfg.horizon as u128 * (cfg.n as u128 * cfg.n as u128) * 8;
    const LIMIT: u128 = 2_000_000_000;
    if bytes > LIMIT {
        return Err(CliError::Config(format!(
            "materializing {} steps at n = {} needs ~{} MB; lower --horizon or n for analysis",
            cfg.horizon,
            cfg.n,
            bytes / 1_000_000
        )));
    }
    Ok(())
}

fn certificate_csv(report: &CertificateReport) -> String {
    let mut out = String::from("k,rho,homogeneous,symmetric,rho_below_one\n");
    let fail_at = |premise: netsis_core::stability::Premise, k: usize| -> bool {
        report
            .failed_premises
            .iter()
            .any(|f| f.premise == premise && f.k == Some(k))
    };
    for (k, &rho) in report.rho_series.iter().enumerate() {
        let hom = !fail_at(
            netsis_core::stability::Premise::HomogeneousInfectionRates,
            k,
        );
        let sym = !fail_at(netsis_core::stability::Premise::SymmetricAdjacency, k);
        let sr = !fail_at(netsis_core::stability::Premise::SpectralRadiusBelowOne, k);
        let _ = writeln!(
            out,
            "{k},{rho:e},{},{},{}",
            u8::from(hom),
            u8::from(sym),
            u8::from(sr)
        );
    }
    out
}

fn certificate_text(report: &CertificateReport) -> String {
    let mut out = String::new();
    let name = match report.theorem {
        netsis_core::stability::Theorem::HomogeneousSymmetric => {
            "homogeneous-symmetric certificate"
        }
        netsis_core::stability::Theorem::SlowVariation => "slow-variation certificate",
    };
    let verdict = match report.verdict {
        Verdict::PremisesHold => "premises_hold",
        Verdict::PremisesFail => "premises_fail",
    };
    let _ = writeln!(out, "{name}: {verdict}");
    let _ = writeln!(
        out,
        "max rho(M(k)) = {:.12} over {} steps (strictness margin {:.1e})",
        report.max_rho,
        report.rho_series.len(),
        report.rho_margin
    );
    if let Some(c) = &report.constants {
        let _ = writeln!(out, "alpha1 = {:.12}", c.alpha1);
        let _ = writeln!(
            out,
            "L (max ||M(k)||_2, observed over horizon) = {:.12}",
            c.l_max
        );
        let _ = writeln!(out, "kappa (max ||M(k+1)-M(k)||_2) = {:.6e}", c.kappa);
        if c.stable {
            let _ = writeln!(out, "mu = {:.12}, p = {:.12}", c.mu, c.p);
            let _ = writeln!(
                out,
                "m = {:.6e} (log10 {:.3})",
                c.m_coef,
                c.log_m_coef / std::f64::consts::LN_10
            );
            let _ = writeln!(
                out,
                "kappa threshold = {:.6e} (log10 {:.3}, epsilon = {})",
                c.kappa_threshold,
                c.log_kappa_threshold / std::f64::consts::LN_10,
                c.epsilon
            );
        } else {
            let _ = writeln!(out, "alpha1 >= 1: slow-variation constants undefined");
        }
        if !c.variation_observed {
            let _ = writeln!(out, "note: single-step horizon, no variation observed");
        }
    }
    if report.failed_premises.is_empty() {
        let _ = writeln!(out, "all premises hold");
    } else {
        for f in &report.failed_premises {
            let _ = writeln!(
                out,
                "failed premise: {} at k={:?} node={:?}: {}",
                f.premise, f.k, f.node, f.detail
            );
        }
    }
    out
}

/// Outcome of the analysis command.
#[derive(Debug)]
pub struct AnalyzeOutcome {
    pub t1: CertificateReport,
    pub t2: CertificateReport,
    pub decay: DecayFit,
}

/// Certifies a scenario's model sequence and replays the Lyapunov
/// verifiers along an uncontrolled trajectory.
///
/// The controller key is ignored here: certificates describe the model as
/// configured, not the controlled closed loop (run `verify-bounds` or
/// `simulate` for that).
pub fn run_analyze(
    cfg: &ScenarioConfig,
    epsilon: f64,
    rho_margin: f64,
    out_dir: &Path,
) -> CliResult<AnalyzeOutcome> {
    cfg.validate()?;
    guard_materialization(cfg)?;
    fs::create_dir_all(out_dir)?;
    let (seq, x0) = materialize(cfg, cfg.seed, cfg.horizon.max(1))?;
    let validation = check_assumptions(&seq);
    if let Some(first) = validation.failures.first() {
        return Err(CliError::Core(first.to_error()));
    }

    let t1 = check_theorem1_with(&seq, rho_margin)?;
    write_file(out_dir, "certificate_t1.txt", &certificate_text(&t1))?;
    write_file(out_dir, "certificate_t1.csv", &certificate_csv(&t1))?;

    let t2 = check_theorem2_with(&seq, epsilon, rho_margin)?;
    write_file(out_dir, "certificate_t2.txt", &certificate_text(&t2))?;

    let traj = simulate(&seq, &x0, None)?;
    let decay = fit_decay(&traj).unwrap_or(DecayFit::AlreadyHealthy);
    let decay_text = match decay {
        DecayFit::AlreadyHealthy => "already healthy: trajectory starts at x = 0\n".to_string(),
        DecayFit::Fit {
            alpha,
            omega,
            points,
        } => format!("alpha = {alpha}\nomega = {omega}\nfit points = {points}\n"),
    };
    write_file(out_dir, "decay.txt", &decay_text)?;

    let dec1 = verify_lyapunov_decrease_t1(&traj, &seq);
    let mut d1 = String::from("k,v,delta_v\n");
    for e in &dec1.entries {
        let _ = writeln!(d1, "{},{:e},{:e}", e.k, e.v, e.delta_v);
    }
    write_file(out_dir, "decrease_t1.csv", &d1)?;

    if t2.holds() {
        if let Some(consts) = &t2.constants {
            let dec2 = verify_lyapunov_decrease_t2(&traj, &seq, consts)?;
            let mut d2 = String::from("k,v,delta_v,sandwich_lo,sandwich_hi\n");
            for e in &dec2.entries {
                let _ = writeln!(
                    d2,
                    "{},{:e},{:e},{:e},{:e}",
                    e.k,
                    e.v,
                    e.delta_v,
                    e.sandwich_lo.unwrap_or(f64::NAN),
                    e.sandwich_hi.unwrap_or(f64::NAN)
                );
            }
            write_file(out_dir, "decrease_t2.csv", &d2)?;
        }
    }

    // Controller-hypothesis audits ride along; they are cheap and answer
    // "would the mitigation guarantees apply to this model".
    let h3 = check_theorem3_hypotheses(&seq);
    let h4 = check_theorem4_hypotheses(&seq);
    let mut hyp = String::new();
    let _ = writeln!(
        hyp,
        "centralized-control hypotheses: {} (row-sum margin {:.6}, psi uniform: {})",
        if h3.pass { "pass" } else { "fail" },
        h3.row_sum_margin,
        h3.psi_uniform
    );
    for f in h3.failures.iter().take(20) {
        let _ = writeln!(
            hyp,
            "  {} at k={} node={:?} value={}",
            f.hypothesis, f.k, f.node, f.value
        );
    }
    let _ = writeln!(
        hyp,
        "distributed-control hypotheses: {} (row-sum margin {:.6})",
        if h4.pass { "pass" } else { "fail" },
        h4.row_sum_margin
    );
    for f in h4.failures.iter().take(20) {
        let _ = writeln!(
            hyp,
            "  {} at k={} node={:?} value={}",
            f.hypothesis, f.k, f.node, f.value
        );
    }
    write_file(out_dir, "control_hypotheses.txt", &hyp)?;

    Ok(AnalyzeOutcome { t1, t2, decay })
}

/// Fits the decay model to a previously written `trajectory.csv`.
pub fn run_analyze_trajectory(dir: &Path, out_dir: &Path) -> CliResult<DecayFit> {
    let path = dir.join("trajectory.csv");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut norms = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let _k = fields.next();
        let _avg = fields.next();
        let norm: f64 = fields
            .next()
            .ok_or_else(|| {
                CliError::Config(format!("{path:?}:{}: missing state_norm", lineno + 1))
            })?
            .parse()
            .map_err(|e| CliError::Config(format!("{path:?}:{}: {e}", lineno + 1)))?;
        norms.push(norm);
    }
    let traj = Trajectory {
        states: Vec::new(),
        avg_infection: vec![0.0; norms.len()],
        state_norm: norms,
        rho: Vec::new(),
        applied_healing: None,
    };
    let fit = fit_decay(&traj)?;
    fs::create_dir_all(out_dir)?;
    let text = match fit {
        DecayFit::AlreadyHealthy => "already healthy: trajectory starts at x = 0\n".to_string(),
        DecayFit::Fit {
            alpha,
            omega,
            points,
        } => format!("alpha = {alpha}\nomega = {omega}\nfit points = {points}\n"),
    };
    write_file(out_dir, "decay.txt", &text)?;
    Ok(fit)
}

fn bound_report_text(report: &BoundReport) -> String {
    let mut out = String::new();
    if !report.applicable {
        let _ = writeln!(
            out,
            "slow-variation premises not met (alpha1 >= 1); bounds not asserted"
        );
        return out;
    }
    let _ = writeln!(out, "name,k,F,lhs,rhs,slack");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{:e},{:e}",
            c.family,
            c.k,
            c.f_power.map(|f| f.to_string()).unwrap_or_default(),
            c.lhs,
            c.rhs,
            c.slack
        );
    }
    let _ = writeln!(
        out,
        "summary: {} checks, all_hold = {}, worst slack = {:e}",
        report.checks.len(),
        report.all_hold,
        report.worst_slack
    );
    out
}

/// Evaluates the proven power/Lyapunov bounds over a scenario's state
/// matrices. A violated bound exits nonzero: the inequalities are
/// theorems, so failure means an implementation bug.
pub fn run_verify_bounds(
    cfg: &ScenarioConfig,
    epsilon: f64,
    f_max: u32,
    out_dir: &Path,
) -> CliResult<BoundReport> {
    cfg.validate()?;
    guard_materialization(cfg)?;
    fs::create_dir_all(out_dir)?;
    let (seq, _x0) = materialize(cfg, cfg.seed, cfg.horizon.max(1))?;
    let validation = check_assumptions(&seq);
    if let Some(first) = validation.failures.first() {
        return Err(CliError::Core(first.to_error()));
    }
    let ms = seq.state_matrices();
    let consts = slow_variation_constants(&ms, epsilon)?;
    let report = verify_appendix_bounds(&ms, &consts, f_max)?;
    write_file(out_dir, "bound_report.txt", &bound_report_text(&report))?;
    if report.applicable && !report.all_hold {
        return Err(CliError::BoundViolation(format!(
            "worst slack {} over {} checks",
            report.worst_slack,
            report.checks.len()
        )));
    }
    Ok(report)
}

/// Parses `0..10` (half-open), `3` or `1,4,9` into a seed list.
pub fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let start: u64 = a
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad seed range start {a:?}: {e}")))?;
        let end: u64 = b
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("bad seed range end {b:?}: {e}")))?;
        if end <= start {
            return Err(CliError::Config(format!("empty seed range {spec:?}")));
        }
        return Ok((start..end).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Config(format!("bad seed {s:?}: {e}")))
        })
        .collect()
}

pub fn parse_controllers(spec: &str) -> CliResult<Vec<ControllerChoice>> {
    spec.split(',')
        .map(|s| match s.trim() {
            "none" => Ok(ControllerChoice::None),
            "centralized" => Ok(ControllerChoice::Centralized),
            "distributed" => Ok(ControllerChoice::Distributed),
            other => Err(CliError::Config(format!("unknown controller {other:?}"))),
        })
        .collect()
}

/// Runs a controller x seed grid in parallel, each run in an isolated
/// subdirectory, and writes `batch_summary.csv`.
pub fn run_batch(
    base: &ScenarioConfig,
    seeds: &[u64],
    controllers: &[ControllerChoice],
    out_root: &Path,
) -> CliResult<Vec<SimOutcome>> {
    use rayon::prelude::*;
    base.validate()?;
    fs::create_dir_all(out_root)?;
    let jobs: Vec<(ControllerChoice, u64)> = controllers
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<CliResult<SimOutcome>> = jobs
        .par_iter()
        .map(|&(controller, seed)| {
            let cfg = ScenarioConfig {
                controller,
                seed,
                ..base.clone()
            };
            let dir = out_root.join(format!("{controller}-seed{seed}"));
            run_simulate(&cfg, &dir)
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failure: Option<CliError> = None;
    let mut summary = String::from(
        "controller,seed,final_avg_infection,min_avg_infection,eradicated_at,saturated_at,status\n",
    );
    for (job, res) in jobs.iter().zip(results) {
        match res {
            Ok(o) => {
                let _ = writeln!(
                    summary,
                    "{},{},{:e},{:e},{},{},ok",
                    o.controller,
                    o.seed,
                    o.final_avg,
                    o.min_avg,
                    o.eradicated_at.map(|k| k.to_string()).unwrap_or_default(),
                    o.saturated_at.map(|k| k.to_string()).unwrap_or_default()
                );
                outcomes.push(o);
            }
            Err(e) => {
                let _ = writeln!(
                    summary,
                    "{},{},,,,,{}",
                    job.0,
                    job.1,
                    csv_field(&format!("error: {e}"))
                );
                // Keep the highest-severity exit code.
                let replace = failure
                    .as_ref()
                    .is_none_or(|f| e.exit_code() > f.exit_code());
                if replace {
                    failure = Some(e);
                }
            }
        }
    }
    write_file(out_root, "batch_summary.csv", &summary)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(outcomes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse_forms() {
        assert_eq!(parse_seeds("0..4").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1, 5,9").unwrap(), vec![1, 5, 9]);
        assert!(parse_seeds("5..5").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn controllers_parse() {
        let v = parse_controllers("none,centralized,distributed").unwrap();
        assert_eq!(v.len(), 3);
        assert!(parse_controllers("central").is_err());
    }

    #[test]
    fn csv_quoting_only_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
