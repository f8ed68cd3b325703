//! Linear growth of `sqrt(<m^2>)` in the near-integrable regime.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{linear_window, LinearWindow};
use crate::config::InsetConfig;
use crate::output::{fmt_f64, Check, Table, TruncationLog};
use crate::runs::quantum_series;
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct InsetCurve {
    pub hbar: f64,
    pub last_t: usize,
    pub window: Option<LinearWindow>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InsetDerived {
    pub g0: f64,
    pub curves: Vec<InsetCurve>,
}

pub struct InsetOutcome {
    pub tables: Vec<Table>,
    pub logs: Vec<TruncationLog>,
    pub derived: InsetDerived,
    pub checks: Vec<Check>,
}

pub fn run(cfg: &InsetConfig) -> Result<InsetOutcome, CliError> {
    let series: Vec<_> = cfg
        .hbar
        .par_iter()
        .enumerate()
        .map(|(i, &hbar)| {
            let delta_cap = (cfg.delta_small - hbar / 2.0).max(0.0);
            quantum_series(
                &format!("hbar={hbar}"),
                cfg.omega0,
                hbar,
                cfg.g0,
                delta_cap,
                cfg.t_max_for(i),
                &cfg.numerics,
                false,
            )
            .map(|s| (hbar, s))
        })
        .collect::<Result<_, _>>()?;

    let mut table = Table::new("inset", &["hbar", "t", "sqrt_m2"]);
    let mut curves = Vec::new();
    let mut logs = Vec::new();
    for (hbar, s) in series {
        let root: Vec<(usize, f64)> = s.rows.iter().map(|&(t, m2)| (t, m2.max(0.0).sqrt())).collect();
        for &(t, r) in &root {
            table.push(vec![fmt_f64(hbar), t.to_string(), fmt_f64(r)]);
        }
        curves.push(InsetCurve {
            hbar,
            last_t: root.last().map_or(0, |r| r.0),
            window: linear_window(&root, cfg.r2_min, cfg.min_window),
        });
        logs.push(s.log);
    }
    let checks = vec![window_order_check(&curves)];
    Ok(InsetOutcome { tables: vec![table], logs, derived: InsetDerived { g0: cfg.g0, curves }, checks })
}

/// Window ends must strictly increase as `hbar` decreases. A censored window
/// only bounds its end from below, so it cannot precede another window.
pub fn window_order_check(curves: &[InsetCurve]) -> Check {
    let mut sorted: Vec<&InsetCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| b.hbar.total_cmp(&a.hbar));
    let mut ok = true;
    for w in sorted.windows(2) {
        match (w[0].window, w[1].window) {
            (Some(a), Some(b)) => ok &= !a.censored && b.t_end > a.t_end,
            _ => ok = false,
        }
    }
    let detail = sorted
        .iter()
        .map(|c| match c.window {
            Some(w) => format!(
                "hbar={}: t<={}{} R^2 {}",
                c.hbar,
                w.t_end,
                if w.censored { "+" } else { "" },
                w.r2
            ),
            None => format!("hbar={}: no window", c.hbar),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Check::new("window_grows_as_hbar_falls", ok, detail)
}
