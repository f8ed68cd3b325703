use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use kicked_harmonics_cli::config::{ExperimentConfig, Scenario, DEFAULT_SEED};
use kicked_harmonics_cli::{execute, CliError};

#[derive(Parser)]
#[command(name = "harmonics", version, about = "Harmonic growth and echo experiments for the kicked quartic oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's output_dir, else ./out/<scenario>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic parts (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Quantum and classical harmonic growth.
    Growth,
    /// Echo fidelity over a ladder of perturbation strengths.
    #[command(name = "echo_ladder")]
    EchoLadder,
    /// Harmonic content at fixed time versus kick strength.
    #[command(name = "crossover_scan")]
    CrossoverScan,
    /// Linear growth window in the near-integrable regime.
    #[command(name = "integrable_inset")]
    IntegrableInset,
    /// Classical ensemble only.
    #[command(name = "classical_growth")]
    ClassicalGrowth,
    /// Invariant suite.
    Validate,
}

impl Command {
    fn scenario(self) -> Scenario {
        match self {
            Command::Growth => Scenario::Growth,
            Command::EchoLadder => Scenario::EchoLadder,
            Command::CrossoverScan => Scenario::CrossoverScan,
            Command::IntegrableInset => Scenario::IntegrableInset,
            Command::ClassicalGrowth => Scenario::ClassicalGrowth,
            Command::Validate => Scenario::Validate,
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let scenario = cli.command.scenario();
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    let start = Instant::now();
    let report = execute(scenario, &cfg, &out, seed)?;
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        eprintln!("{status} {}: {}", c.name, c.detail);
    }
    eprintln!(
        "run {} written to {} in {:.1} s",
        report.run_id,
        report.out_dir.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(report.invariants_hold())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
