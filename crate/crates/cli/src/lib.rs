//! Experiment runner for the kicked quartic oscillator: scenario execution,
//! configuration and output writing.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod output;
pub mod runs;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::output::{run_id, Check, Manifest, OutputDir, Table, TruncationLog};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("truncation ceiling: {0}")]
    Ceiling(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(kicked_harmonics::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ceiling(_) => 3,
            CliError::Invariant(_) | CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}

impl From<kicked_harmonics::Error> for CliError {
    fn from(e: kicked_harmonics::Error) -> Self {
        use kicked_harmonics::Error as E;
        match e {
            E::CeilingReached { .. } => CliError::Ceiling(e.to_string()),
            E::Config(msg) => CliError::Config(msg),
            E::InvalidParam(_) => CliError::Config(e.to_string()),
            E::Invariant(msg) => CliError::Invariant(msg),
            E::Io(io) => CliError::Io(io),
            other => CliError::Core(other),
        }
    }
}

/// Result of a completed run whose outputs have been written.
#[derive(Debug)]
pub struct RunReport {
    pub run_id: String,
    pub out_dir: PathBuf,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn invariants_hold(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.invariant)
    }
}

/// Runs `scenario` with its section of `cfg` and writes CSVs plus
/// `manifest.json` into `out_dir`.
pub fn execute(scenario: Scenario, cfg: &ExperimentConfig, out_dir: &Path, seed: u64) -> Result<RunReport, CliError> {
    cfg.validate_for(scenario)?;
    let section = section_json(scenario, cfg)?;
    let id = run_id(scenario.name(), seed, &section.to_string());
    let mut out = OutputDir::create(out_dir, id.clone(), scenario.name())?;

    let (tables, logs, derived, checks): (Vec<Table>, Vec<TruncationLog>, serde_json::Value, Vec<Check>) =
        match scenario {
            Scenario::Growth => {
                let o = runs::growth::run(&cfg.growth, seed)?;
                (o.tables, o.logs, to_json(&o.derived)?, o.checks)
            }
            Scenario::EchoLadder => {
                let o = runs::echo::run(&cfg.echo_ladder)?;
                (o.tables, o.logs, to_json(&o.derived)?, o.checks)
            }
            Scenario::CrossoverScan => {
                let o = runs::crossover::run(&cfg.crossover_scan)?;
                (o.tables, o.logs, to_json(&o.derived)?, o.checks)
            }
            Scenario::IntegrableInset => {
                let o = runs::inset::run(&cfg.integrable_inset)?;
                (o.tables, o.logs, to_json(&o.derived)?, o.checks)
            }
            Scenario::ClassicalGrowth => {
                let o = runs::classical::run(&cfg.classical_growth, seed)?;
                (vec![o.table], Vec::new(), to_json(&o.derived)?, o.checks)
            }
            Scenario::Validate => {
                let o = runs::validate::run(&cfg.validate, seed)?;
                (o.tables, Vec::new(), to_json(&o.derived)?, o.checks)
            }
        };
    for t in &tables {
        out.write_table(t)?;
    }
    out.write_manifest(&Manifest {
        run_id: id.clone(),
        scenario: scenario.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: section,
        truncation: logs,
        derived,
        checks: checks.clone(),
    })?;
    Ok(RunReport { run_id: id, out_dir: out_dir.to_path_buf(), checks })
}

fn to_json<T: Serialize>(value: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(value).map_err(|e| CliError::Invariant(e.to_string()))
}

/// Canonical JSON of the config section the scenario reads.
fn section_json(scenario: Scenario, cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    match scenario {
        Scenario::Growth => to_json(&cfg.growth),
        Scenario::EchoLadder => to_json(&cfg.echo_ladder),
        Scenario::CrossoverScan => to_json(&cfg.crossover_scan),
        Scenario::IntegrableInset => to_json(&cfg.integrable_inset),
        Scenario::ClassicalGrowth => to_json(&cfg.classical_growth),
        Scenario::Validate => to_json(&cfg.validate),
    }
}
