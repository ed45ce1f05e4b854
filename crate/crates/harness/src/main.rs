use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use bhcrab_cli::config::{ExperimentKind, RunConfig};
use bhcrab_cli::experiments::{self, RunReport};
use bhcrab_cli::record::RunRecord;
use bhcrab_cli::worker_threads;

/// Optimal-control experiments for the superfluid→Mott-insulator sweep in
/// the 1D Bose-Hubbard chain.
///
/// Exit codes: 0 success, 2 halted-at-threshold, 3 budget-exhausted,
/// 1 error.
#[derive(Parser)]
#[command(name = "bhcrab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides [optimizer].seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Backend kind (exact | mps); overrides [backend].kind.
    #[arg(long)]
    backend: Option<String>,
    /// Worker threads (also BHCRAB_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Additional overrides as section.key=value, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the CRAB optimization loop.
    Optimize(CommonArgs),
    /// Evaluate a single pulse without optimization.
    EvaluatePulse {
        #[command(flatten)]
        common: CommonArgs,
        /// Re-evaluate the best pulse of a previous run record.
        #[arg(long)]
        pulse_from: Option<PathBuf>,
    },
    /// Re-apply an optimized pulse to resized systems (constant filling).
    RobustnessSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Run record holding the optimized pulse.
        #[arg(long)]
        pulse_from: PathBuf,
    },
    /// Score the unoptimized guess family (exponential, linear, random
    /// correction, transferred small-system pulse).
    BaselineGuesses(CommonArgs),
    /// Fixed-pulse sensitivity to bond dimension, time step, and cutoff.
    ConvergenceStudy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        pulse_from: Option<PathBuf>,
    },
    /// Validate a configuration file and print its content hash.
    Check {
        #[arg(long, short = 'c')]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

fn resolve_config(common: &CommonArgs, experiment: ExperimentKind) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    for s in &common.sets {
        config = config.with_override(s)?;
    }
    if let Some(out) = &common.out {
        config.output_dir = out.display().to_string();
    }
    if let Some(seed) = common.seed {
        config.optimizer.seed = seed;
    }
    if let Some(backend) = &common.backend {
        config = config.with_override(&format!("backend.kind=\"{backend}\""))?;
    }
    config.experiment = experiment;
    config.validate()?;
    Ok(config)
}

fn load_pulse(path: &PathBuf) -> Result<bhcrab::crab::PulseSpec<f64>> {
    let record = RunRecord::load(path)?;
    record
        .best_spec
        .context("record carries no best pulse spec")
}

fn init_workers(common: &CommonArgs, config: &RunConfig) {
    let n = common
        .workers
        .map(|w| w.max(1))
        .unwrap_or_else(|| worker_threads(config.limits.workers));
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn execute() -> Result<RunReport> {
    let cli = Cli::parse();
    match cli.command {
        Command::Optimize(common) => {
            let config = resolve_config(&common, ExperimentKind::Optimize)?;
            init_workers(&common, &config);
            experiments::run(&config)
        }
        Command::EvaluatePulse { common, pulse_from } => {
            let config = resolve_config(&common, ExperimentKind::EvaluatePulse)?;
            init_workers(&common, &config);
            let spec = pulse_from.as_ref().map(load_pulse).transpose()?;
            experiments::run_with_pulse(&config, spec.as_ref())
        }
        Command::RobustnessSweep { common, pulse_from } => {
            let config = resolve_config(&common, ExperimentKind::RobustnessSweep)?;
            init_workers(&common, &config);
            let spec = load_pulse(&pulse_from)?;
            experiments::run_with_pulse(&config, Some(&spec))
        }
        Command::BaselineGuesses(common) => {
            let config = resolve_config(&common, ExperimentKind::BaselineGuesses)?;
            init_workers(&common, &config);
            experiments::run(&config)
        }
        Command::ConvergenceStudy { common, pulse_from } => {
            let config = resolve_config(&common, ExperimentKind::ConvergenceStudy)?;
            init_workers(&common, &config);
            let spec = pulse_from.as_ref().map(load_pulse).transpose()?;
            experiments::run_with_pulse(&config, spec.as_ref())
        }
        Command::Check { config, sets } => {
            let mut cfg = RunConfig::load(&config)?;
            for s in &sets {
                cfg = cfg.with_override(s)?;
            }
            cfg.validate()?;
            println!("ok {}", cfg.content_hash());
            std::process::exit(0);
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute() {
        Ok(report) => {
            let code = report.status.exit_code();
            println!(
                "{} finished: status {:?}, {} evaluation(s){}",
                report.record.config_snapshot.experiment,
                report.status,
                report.record.evaluations,
                report
                    .record
                    .best_defect_density
                    .map(|r| format!(", best rho {r:.4e}"))
                    .unwrap_or_default()
            );
            ExitCode::from(code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
