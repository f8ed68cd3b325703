//! Scan of `<m^2>` at fixed time over the kick strength.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{steepest_rise, Rise};
use crate::config::CrossoverConfig;
use crate::output::{fmt_f64, Check, Table, TruncationLog};
use crate::runs::quantum_series;
use crate::CliError;

/// Kick strengths compared for the overall rise and the required ratio.
pub const RATIO_PAIR: (f64, f64) = (0.3, 1.5);
pub const MIN_RATIO: f64 = 10.0;
/// Interval that must contain the steepest adjacent rise.
pub const RISE_WINDOW: (f64, f64) = (0.4, 0.8);

#[derive(Clone, Debug, Serialize)]
pub struct CrossoverDerived {
    pub ratio: Option<f64>,
    /// Largest adjacent ratio `m2(g_{i+1}) / m2(g_i)`.
    pub steepest_by_ratio: Option<Rise>,
    /// Largest adjacent log-log slope.
    pub steepest_by_elasticity: Option<Rise>,
}

pub struct CrossoverOutcome {
    pub tables: Vec<Table>,
    pub logs: Vec<TruncationLog>,
    pub derived: CrossoverDerived,
    pub checks: Vec<Check>,
    pub scan: Vec<(f64, f64)>,
}

fn value_at(scan: &[(f64, f64)], g0: f64, step: f64) -> Option<f64> {
    scan.iter().find(|r| (r.0 - g0).abs() <= step / 2.0).map(|r| r.1)
}

pub fn run(cfg: &CrossoverConfig) -> Result<CrossoverOutcome, CliError> {
    let grid = cfg.grid();
    let results: Vec<_> = grid
        .par_iter()
        .map(|&g0| {
            quantum_series(&format!("g0={g0}"), cfg.omega0, cfg.hbar, g0, cfg.delta_cap, cfg.time, &cfg.numerics, true)
                .map(|s| (g0, s))
        })
        .collect::<Result<_, _>>()?;
    let mut table = Table::new("crossover", &["g0", "m2"]);
    let mut scan = Vec::new();
    let mut logs = Vec::new();
    for (g0, s) in results {
        let m2 = s.rows.last().map_or(f64::NAN, |r| r.1);
        table.push(vec![fmt_f64(g0), fmt_f64(m2)]);
        scan.push((g0, m2));
        logs.push(s.log);
    }

    let ratio = match (value_at(&scan, RATIO_PAIR.0, cfg.g0_step), value_at(&scan, RATIO_PAIR.1, cfg.g0_step)) {
        (Some(lo), Some(hi)) if lo > 0.0 => Some(hi / lo),
        _ => None,
    };
    let rises = steepest_rise(&scan);
    let mut checks = Vec::new();
    if let Some(r) = ratio {
        checks.push(Check::new(
            "crossover_ratio",
            r >= MIN_RATIO,
            format!("m2(g0={})/m2(g0={}) = {r}", RATIO_PAIR.1, RATIO_PAIR.0),
        ));
    }
    if let Some((by_ratio, by_elast)) = rises {
        let inside = |r: &Rise| r.g0_lo >= RISE_WINDOW.0 - 1e-9 && r.g0_hi <= RISE_WINDOW.1 + 1e-9;
        checks.push(Check::new(
            "steepest_rise_location",
            inside(&by_ratio),
            format!(
                "largest adjacent ratio {} over g0 {}..{}; largest log-log slope {} over g0 {}..{}",
                by_ratio.ratio, by_ratio.g0_lo, by_ratio.g0_hi, by_elast.elasticity, by_elast.g0_lo, by_elast.g0_hi
            ),
        ));
    }
    Ok(CrossoverOutcome {
        tables: vec![table],
        logs,
        derived: CrossoverDerived {
            ratio,
            steepest_by_ratio: rises.map(|r| r.0),
            steepest_by_elasticity: rises.map(|r| r.1),
        },
        checks,
        scan,
    })
}
