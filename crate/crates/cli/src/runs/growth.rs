//! Harmonic growth, quantum at several `hbar` against classical.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{departure_time, exponential_window, Departure, ExpFit};
use crate::config::GrowthConfig;
use crate::output::{fmt_f64, Check, Table, TruncationLog};
use crate::runs::classical::{classical_series, classical_table, ClassicalPoint};
use crate::runs::quantum_series;
use crate::CliError;

/// Minimum R^2 of the log-linear classical fit.
pub const EXP_FIT_R2: f64 = 0.98;

#[derive(Clone, Debug, Serialize)]
pub struct CurveSummary {
    pub hbar: f64,
    pub delta_cap: f64,
    pub last_t: usize,
    pub departure: Option<Departure>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthDerived {
    pub curves: Vec<CurveSummary>,
    pub classical_fit: Option<ExpFit>,
}

pub struct GrowthOutcome {
    pub tables: Vec<Table>,
    pub logs: Vec<TruncationLog>,
    pub derived: GrowthDerived,
    pub checks: Vec<Check>,
    pub classical: Vec<ClassicalPoint>,
    pub quantum: Vec<(f64, Vec<(usize, f64)>)>,
}

pub fn run(cfg: &GrowthConfig, seed: u64) -> Result<GrowthOutcome, CliError> {
    let quantum: Vec<_> = cfg
        .hbar
        .par_iter()
        .map(|&hbar| {
            let delta_cap = (cfg.delta_small - hbar / 2.0).max(0.0);
            quantum_series(
                &format!("hbar={hbar}"),
                cfg.omega0,
                hbar,
                cfg.g0,
                delta_cap,
                cfg.t_max,
                &cfg.numerics,
                false,
            )
            .map(|s| (hbar, delta_cap, s))
        })
        .collect::<Result<_, _>>()?;
    let classical = classical_series(
        cfg.omega0,
        cfg.g0,
        cfg.delta_small,
        &cfg.classical,
        seed,
        cfg.classical_t_max,
        cfg.numerics.kick_convention,
    )?;
    let classical_rows: Vec<(usize, f64)> = classical.iter().map(|p| (p.t, p.m2)).collect();

    let mut table = Table::new("growth", &["series", "hbar", "t", "m2"]);
    let mut curves = Vec::new();
    let mut logs = Vec::new();
    for (hbar, delta_cap, s) in &quantum {
        for &(t, m2) in &s.rows {
            table.push(vec!["quantum".into(), fmt_f64(*hbar), t.to_string(), fmt_f64(m2)]);
        }
        curves.push(CurveSummary {
            hbar: *hbar,
            delta_cap: *delta_cap,
            last_t: s.rows.last().map_or(0, |r| r.0),
            departure: departure_time(&s.rows, &classical_rows, cfg.departure_ratio),
        });
        logs.push(s.log.clone());
    }
    for p in &classical {
        table.push(vec!["classical".into(), String::new(), p.t.to_string(), fmt_f64(p.m2)]);
    }

    let fit = exponential_window(&classical.iter().map(ClassicalPoint::noisy).collect::<Vec<_>>());
    let mut checks = vec![match &fit {
        Some(f) => Check::new(
            "classical_exponential_growth",
            f.r2 >= EXP_FIT_R2,
            format!("ln m2 fit over t={}..={}: rate {} R^2 {}", f.t_start, f.t_end, f.rate, f.r2),
        ),
        None => Check::new("classical_exponential_growth", false, "no resolved window".into()),
    }];
    checks.push(departure_order_check(&curves));

    Ok(GrowthOutcome {
        tables: vec![table, classical_table("growth_classical", &classical, cfg.classical.n_traj, seed)],
        logs,
        derived: GrowthDerived { curves, classical_fit: fit },
        checks,
        quantum: quantum.iter().map(|(h, _, s)| (*h, s.rows.clone())).collect(),
        classical,
    })
}

/// Departures must come later for smaller `hbar`.
pub fn departure_order_check(curves: &[CurveSummary]) -> Check {
    let mut sorted: Vec<&CurveSummary> = curves.iter().collect();
    sorted.sort_by(|a, b| b.hbar.total_cmp(&a.hbar));
    let mut ok = true;
    let mut detail = Vec::new();
    for c in &sorted {
        detail.push(format!("hbar={}: {:?}", c.hbar, c.departure));
    }
    for w in sorted.windows(2) {
        match (w[0].departure, w[1].departure) {
            (Some(a), Some(b)) => {
                if a.before(b) != Some(true) {
                    ok = false;
                }
            }
            _ => ok = false,
        }
    }
    Check::new("departure_order", ok, detail.join("; "))
}
