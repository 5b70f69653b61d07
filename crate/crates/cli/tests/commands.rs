//! Command-level tests: artifact schemas, edge cases, and the binary's
//! exit-code contract (0 ok, 1 config, 2 assumption violation, 3 proven
//! bound violation).

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use netsis_cli::{load_config, run_analyze, run_simulate, run_verify_bounds};
use netsis_core::dynamics::DecayFit;
use netsis_core::netgen::{ControllerChoice, ScenarioConfig};

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_writes_expected_artifacts() {
    let dir = tmp("sim-artifacts");
    let cfg = ScenarioConfig {
        n: 40,
        horizon: 80,
        controller: ControllerChoice::Distributed,
        ..ScenarioConfig::default()
    };
    let outcome = run_simulate(&cfg, &dir).unwrap();
    assert_eq!(outcome.horizon, 80);
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), "k,avg_infection,state_norm,rho_M");
    assert_eq!(traj.lines().count(), 82); // header + horizon + 1 states
    let trace = fs::read_to_string(dir.join("controller_trace.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "k,node,gamma,psi,delta_hat,saturated"
    );
    assert_eq!(trace.lines().count(), 1 + 80 * 40);
    let svg = fs::read_to_string(dir.join("rho_m.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn simulate_horizon_zero_yields_initial_row_and_single_point_chart() {
    let dir = tmp("sim-horizon0");
    let cfg = ScenarioConfig {
        n: 10,
        horizon: 0,
        ..ScenarioConfig::default()
    };
    run_simulate(&cfg, &dir).unwrap();
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 2); // header + x(0)
    let svg = fs::read_to_string(dir.join("avg_infection.svg")).unwrap();
    assert!(svg.contains("<circle"));
}

#[test]
fn simulate_per_node_columns() {
    let dir = tmp("sim-per-node");
    let cfg = ScenarioConfig {
        n: 5,
        horizon: 3,
        r: Some(0.5),
        per_node_columns: true,
        ..ScenarioConfig::default()
    };
    run_simulate(&cfg, &dir).unwrap();
    let traj = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert_eq!(
        traj.lines().next().unwrap(),
        "k,avg_infection,state_norm,rho_M,x_0,x_1,x_2,x_3,x_4"
    );
}

#[test]
fn analyze_stable_config_reports_certificate_and_decay() {
    let dir = tmp("analyze-stable");
    // Tiny beta keeps rho(M(k)) < 1 with the random healing rates.
    let cfg = ScenarioConfig {
        n: 20,
        beta: 0.002,
        horizon: 150,
        seed: 3,
        ..ScenarioConfig::default()
    };
    let outcome = run_analyze(&cfg, 0.5, 1e-9, &dir).unwrap();
    assert!(outcome.t1.holds(), "{:?}", outcome.t1.failed_premises);
    match outcome.decay {
        DecayFit::Fit { omega, .. } => assert!(omega < 1.0),
        other => panic!("expected decay fit, got {other:?}"),
    }
    for f in [
        "certificate_t1.txt",
        "certificate_t1.csv",
        "certificate_t2.txt",
        "decay.txt",
        "decrease_t1.csv",
        "control_hypotheses.txt",
    ] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(dir.join("certificate_t1.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "k,rho,homogeneous,symmetric,rho_below_one"
    );
}

#[test]
fn analyze_unstable_config_lists_offending_steps() {
    let dir = tmp("analyze-unstable");
    let cfg = ScenarioConfig {
        n: 30,
        horizon: 40,
        ..ScenarioConfig::default()
    };
    let outcome = run_analyze(&cfg, 0.5, 1e-9, &dir).unwrap();
    assert!(!outcome.t1.holds());
    assert!(outcome.t1.failed_premises.iter().any(|f| f.k == Some(0)));
}

#[test]
fn analyze_healthy_start_reports_already_healthy() {
    let dir = tmp("analyze-healthy");
    let cfg = ScenarioConfig {
        n: 10,
        beta: 0.002,
        horizon: 30,
        infected_count: Some(0),
        ..ScenarioConfig::default()
    };
    let outcome = run_analyze(&cfg, 0.5, 1e-9, &dir).unwrap();
    assert_eq!(outcome.decay, DecayFit::AlreadyHealthy);
}

#[test]
fn verify_bounds_inapplicable_on_unstable_sequence() {
    let dir = tmp("bounds-unstable");
    let cfg = ScenarioConfig {
        n: 20,
        horizon: 10,
        ..ScenarioConfig::default()
    };
    let report = run_verify_bounds(&cfg, 0.5, 8, &dir).unwrap();
    assert!(!report.applicable);
    let text = fs::read_to_string(dir.join("bound_report.txt")).unwrap();
    assert!(text.contains("not asserted"));
}

#[test]
fn verify_bounds_small_stable_sequence_all_hold() {
    let dir = tmp("bounds-stable");
    let cfg = ScenarioConfig {
        n: 6,
        beta: 0.002,
        r: Some(0.4),
        horizon: 12,
        seed: 5,
        ..ScenarioConfig::default()
    };
    let report = run_verify_bounds(&cfg, 0.5, 16, &dir).unwrap();
    assert!(report.applicable);
    assert!(report.all_hold);
    assert!(report.worst_slack >= 0.0);
}

#[test]
fn config_roundtrip_from_toml() {
    let dir = tmp("config-load");
    let path = dir.join("cfg.toml");
    fs::write(
        &path,
        "schema_version = 1\nn = 12\nh = 0.2\nbeta = 0.4\ncontroller = \"distributed\"\nseed = 9\n",
    )
    .unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.n, 12);
    assert_eq!(cfg.controller, ControllerChoice::Distributed);
    assert_eq!(cfg.seed, 9);
    // Unset keys fall back to documented defaults.
    assert_eq!(cfg.l, 1.0);
    assert!((cfg.radius() - 0.06).abs() < 1e-15);
}

fn netsis_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netsis"))
}

#[test]
fn binary_exit_codes() {
    let dir = tmp("exit-codes");

    // Unknown key: config error, exit 1, diagnostic points at the key.
    let bad = dir.join("bad.toml");
    fs::write(&bad, "schema_version = 1\nnn = 5\n").unwrap();
    let out = netsis_bin()
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("o1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nn"), "stderr: {stderr}");

    // Dense graph with h*beta*(row sum) > 1: assumption violation, exit 2.
    let violating = dir.join("violating.toml");
    fs::write(
        &violating,
        "schema_version = 1\nn = 5\nh = 0.3\nbeta = 1.0\nr = 1.5\nhorizon = 10\n",
    )
    .unwrap();
    let out = netsis_bin()
        .args(["simulate", "--config"])
        .arg(&violating)
        .arg("--out")
        .arg(dir.join("o2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("node"), "stderr: {stderr}");

    // Healthy run: exit 0.
    let good = dir.join("good.toml");
    fs::write(
        &good,
        "schema_version = 1\nn = 20\nhorizon = 30\ncontroller = \"centralized\"\n",
    )
    .unwrap();
    let out = netsis_bin()
        .args(["simulate", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.join("o3"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn binary_batch_and_reanalyze_trajectory() {
    let dir = tmp("batch-reanalyze");
    let cfg = dir.join("cfg.toml");
    fs::write(&cfg, "schema_version = 1\nn = 30\nhorizon = 60\n").unwrap();
    let out = netsis_bin()
        .args(["batch", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("grid"))
        .args(["--seeds", "0..2", "--controllers", "centralized"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("grid/batch_summary.csv").exists());
    assert!(dir.join("grid/centralized-seed0/trajectory.csv").exists());
    assert!(dir.join("grid/centralized-seed1/trajectory.csv").exists());

    let out = netsis_bin()
        .args(["analyze", "--trajectory"])
        .arg(dir.join("grid/centralized-seed0"))
        .arg("--out")
        .arg(dir.join("redecay"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("redecay/decay.txt").exists());
}
