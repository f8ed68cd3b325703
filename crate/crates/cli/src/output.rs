//! CSV and manifest writers. Every file starts with a `# run_id=...` line;
//! floats use the shortest round-trip decimal form; writes are atomic.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Shortest round-trip decimal; non-finite values as `nan`/`inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Run identifier: first 16 hex digits of SHA-256 over scenario, crate
/// version, seed and the canonical JSON of the config.
pub fn run_id(scenario: &str, seed: u64, config_json: &str) -> String {
    let mut h = Sha256::new();
    h.update(scenario.as_bytes());
    h.update([0]);
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    h.update(config_json.as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

/// A table with a frozen column list.
pub struct Table {
    name: String,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn render(&self, run_id: &str, scenario: &str) -> String {
        let mut out = format!("# run_id={run_id} scenario={scenario}\n");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Output directory bound to one run.
pub struct OutputDir {
    dir: PathBuf,
    run_id: String,
    scenario: &'static str,
    records: Vec<OutputRecord>,
}

impl OutputDir {
    pub fn create(dir: &Path, run_id: String, scenario: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), run_id, scenario, records: Vec::new() })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write_table(&mut self, table: &Table) -> Result<(), CliError> {
        let text = table.render(&self.run_id, self.scenario);
        let file = format!("{}.csv", table.name);
        write_atomic(&self.dir.join(&file), text.as_bytes())?;
        self.records.push(OutputRecord {
            file,
            rows: table.len(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        });
        Ok(())
    }

    /// Writes `manifest.json` last, listing every table written before it.
    pub fn write_manifest<T: Serialize>(&self, manifest: &Manifest<T>) -> Result<(), CliError> {
        let mut value = serde_json::to_value(manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
        value["outputs"] = serde_json::to_value(&self.records).map_err(|e| CliError::Invariant(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Invariant(e.to_string()))?;
        text.push('\n');
        write_atomic(&self.dir.join("manifest.json"), text.as_bytes())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// A failed invariant makes the run exit with status 1; other checks are
    /// reported only.
    pub invariant: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, invariant: false, detail }
    }

    pub fn invariant(name: &str, pass: bool, detail: String) -> Self {
        Check { invariant: true, ..Check::new(name, pass, detail) }
    }
}

/// Per-series truncation bookkeeping.
#[derive(Clone, Debug, Serialize)]
pub struct TruncationLog {
    pub label: String,
    pub members: usize,
    pub discarded_weight: f64,
    pub initial_dim: usize,
    pub peak_dim: usize,
    pub resizes: Vec<(usize, usize)>,
    pub max_tail_mass: f64,
    /// Last time reached if the series ended early.
    pub stopped_at: Option<usize>,
    /// `dim_ceiling` or `work_limit` when the series ended early.
    pub stop_reason: Option<String>,
    /// Complex multiply-adds spent on the series, where tracked.
    pub work: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<T: Serialize> {
    pub run_id: String,
    pub scenario: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub truncation: Vec<TruncationLog>,
    pub derived: T,
    pub checks: Vec<Check>,
}
