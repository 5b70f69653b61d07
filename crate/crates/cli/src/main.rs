use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netsis_cli::{
    load_config, parse_controllers, parse_seeds, run_analyze, run_analyze_trajectory, run_batch,
    run_simulate, run_verify_bounds, CliError,
};
use netsis_core::dynamics::DecayFit;
use netsis_core::netgen::{ControllerChoice, ScenarioConfig};
use netsis_core::spectral::DEFAULT_F_MAX;
use netsis_core::stability::DEFAULT_RHO_MARGIN;

/// Networked SIS epidemic simulator: time-varying graphs, stability
/// certificates, and data-driven healing-rate mitigation.
#[derive(Parser)]
#[command(name = "netsis", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// RNG seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Controller: none | centralized | distributed.
    #[arg(long)]
    controller: Option<String>,
    /// Number of steps to simulate (overrides the config).
    #[arg(long)]
    horizon: Option<usize>,
    /// Record rho(M(k)) every this many steps.
    #[arg(long)]
    stride: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(controller) = &self.controller {
            let parsed = parse_controllers(controller)?;
            match parsed.as_slice() {
                [one] => cfg.controller = *one,
                _ => {
                    return Err(CliError::Config(
                        "--controller takes a single value here".into(),
                    ))
                }
            }
        }
        if let Some(horizon) = self.horizon {
            cfg.horizon = horizon;
        }
        if let Some(stride) = self.stride {
            cfg.rho_stride = Some(stride);
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; write trajectory/rho CSVs, controller trace, and
    /// SVG charts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check both stability certificates, fit the decay rate, and replay
    /// the Lyapunov-decrease verifiers on the uncontrolled model.
    Analyze {
        #[arg(long, conflicts_with = "trajectory")]
        config: Option<PathBuf>,
        /// Re-analyze a directory containing a previously written
        /// trajectory.csv (decay fit only).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Epsilon in (0,1) for the slow-variation threshold.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Strictness margin for rho < 1.
        #[arg(long, default_value_t = DEFAULT_RHO_MARGIN)]
        rho_margin: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the proven matrix-power and Lyapunov bounds over the
    /// scenario's state matrices; exits 3 if any proven bound fails.
    VerifyBounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Epsilon in (0,1) for the slow-variation threshold.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Largest matrix power to check.
        #[arg(long, default_value_t = DEFAULT_F_MAX)]
        f_max: u32,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a controller x seed grid in parallel, one subdirectory per run.
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seeds: `0..10`, `7`, or `1,4,9`.
        #[arg(long)]
        seeds: String,
        /// Comma-separated controllers to sweep.
        #[arg(long, default_value = "none,centralized,distributed")]
        controllers: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            let outcome = run_simulate(&cfg, &out)?;
            println!(
                "simulate: controller={} seed={} horizon={} final_avg={:.6e} eradicated_at={:?} saturated_at={:?}",
                outcome.controller,
                outcome.seed,
                outcome.horizon,
                outcome.final_avg,
                outcome.eradicated_at,
                outcome.saturated_at
            );
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(())
        }
        Command::Analyze {
            config,
            trajectory,
            out,
            epsilon,
            rho_margin,
            overrides,
        } => {
            if let Some(dir) = trajectory {
                let fit = run_analyze_trajectory(&dir, &out)?;
                match fit {
                    DecayFit::AlreadyHealthy => println!("decay: already healthy"),
                    DecayFit::Fit {
                        alpha,
                        omega,
                        points,
                    } => {
                        println!("decay: alpha={alpha:.6e} omega={omega:.12} points={points}")
                    }
                }
                return Ok(());
            }
            let config = config
                .ok_or_else(|| CliError::Config("analyze needs --config or --trajectory".into()))?;
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            let outcome = run_analyze(&cfg, epsilon, rho_margin, &out)?;
            if cfg.controller != ControllerChoice::None {
                println!("note: analyze certifies the uncontrolled model; controller key ignored");
            }
            println!(
                "homogeneous-symmetric certificate: {}",
                if outcome.t1.holds() {
                    "premises_hold"
                } else {
                    "premises_fail"
                }
            );
            for f in outcome.t1.failed_premises.iter().take(5) {
                println!("  failed: {} (k={:?})", f.premise, f.k);
            }
            println!(
                "slow-variation certificate:       {}",
                if outcome.t2.holds() {
                    "premises_hold"
                } else {
                    "premises_fail"
                }
            );
            for f in outcome.t2.failed_premises.iter().take(5) {
                println!("  failed: {} (k={:?})", f.premise, f.k);
            }
            println!("max rho(M(k)) = {:.9}", outcome.t1.max_rho);
            match outcome.decay {
                DecayFit::AlreadyHealthy => println!("decay: already healthy"),
                DecayFit::Fit {
                    alpha,
                    omega,
                    points,
                } => {
                    println!("decay: alpha={alpha:.6e} omega={omega:.12} points={points}")
                }
            }
            println!("reports in {}", out.display());
            Ok(())
        }
        Command::VerifyBounds {
            config,
            out,
            epsilon,
            f_max,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            let report = run_verify_bounds(&cfg, epsilon, f_max, &out)?;
            if report.applicable {
                println!(
                    "bounds: {} checks, all hold, worst slack {:.6e}",
                    report.checks.len(),
                    report.worst_slack
                );
            } else {
                println!("slow-variation premises not met; bounds not asserted");
            }
            println!("report in {}", out.display());
            Ok(())
        }
        Command::Batch {
            config,
            out,
            seeds,
            controllers,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            overrides.apply(&mut cfg)?;
            let seeds = parse_seeds(&seeds)?;
            let controllers = parse_controllers(&controllers)?;
            let outcomes = run_batch(&cfg, &seeds, &controllers, &out)?;
            for o in &outcomes {
                println!(
                    "{} seed {}: final_avg={:.3e} eradicated_at={:?}",
                    o.controller, o.seed, o.final_avg, o.eradicated_at
                );
            }
            println!("summary in {}", out.join("batch_summary.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
