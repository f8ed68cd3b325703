//! Loschmidt echo ladder around the critical perturbation strength.

use std::time::Instant;

use kicked_harmonics::echo::{critical_strength, run_echo_from, run_forward, EchoProtocol, EchoRecord};
use kicked_harmonics::model::{build_initial, required_initial_dim, InitialSpec, ModelParams, TruncationPolicy};
use kicked_harmonics::propagator::AdaptiveEvolver;
use serde::Serialize;

use crate::config::{EchoLadderConfig, KickConvention};
use crate::output::{fmt_f64, Check, Table, TruncationLog};
use crate::runs::MIN_DIM;
use crate::CliError;

pub const FIDELITY_TOL: f64 = 1e-10;
pub const DEVIATION_TOL: f64 = 1e-9;
/// Pointwise agreement of the unperturbed backward leg with the reversed
/// forward leg, relative to `max(1, m2)`.
pub const RETRACE_TOL: f64 = 1e-8;
pub const TRACE_FORM_TOL: f64 = 1e-10;
/// Ladder rung that must stay reversible and its threshold.
pub const SMALL_RUNG: (i32, f64) = (8, 0.95);
/// Ladder rung that must lose reversibility and its threshold.
pub const LARGE_RUNG: (i32, f64) = (-6, 0.5);
pub const MAX_INVERSIONS: usize = 1;

#[derive(Clone, Debug, Serialize)]
pub struct RungSummary {
    /// `None` for the unperturbed echo.
    pub l: Option<i32>,
    pub xi: f64,
    pub fidelity: f64,
    pub fidelity_at_reversal: f64,
    pub t_min: usize,
    pub m2_min: f64,
    pub max_deviation: f64,
    pub peak_dim: usize,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EchoDerived {
    pub m2_at_reversal: f64,
    pub xi_c: f64,
    pub rungs: Vec<RungSummary>,
    pub minimum_inversions: Option<usize>,
}

pub struct EchoOutcome {
    pub tables: Vec<Table>,
    pub logs: Vec<TruncationLog>,
    pub derived: EchoDerived,
    pub checks: Vec<Check>,
}

fn summary(l: Option<i32>, rec: &EchoRecord, ev: &AdaptiveEvolver, seconds: f64) -> RungSummary {
    RungSummary {
        l,
        xi: rec.xi,
        fidelity: rec.fidelity,
        fidelity_at_reversal: rec.fidelity_at_reversal,
        t_min: rec.minimum.0,
        m2_min: rec.minimum.1,
        max_deviation: rec.max_deviation,
        peak_dim: ev.peak_dim(),
        seconds,
    }
}

/// Adjacent inversions of the minima ordered by increasing `l`; a larger
/// `l` (smaller `xi`) must not have a larger minimum.
pub fn minimum_inversions(rungs: &[RungSummary]) -> usize {
    let mut by_l: Vec<(i32, f64)> = rungs.iter().filter_map(|r| r.l.map(|l| (l, r.m2_min))).collect();
    by_l.sort_by_key(|r| r.0);
    by_l.windows(2).filter(|w| w[1].1 > w[0].1).count()
}

pub fn run(cfg: &EchoLadderConfig) -> Result<EchoOutcome, CliError> {
    if cfg.numerics.kick_convention != KickConvention::PerPeriod {
        return Err(CliError::Config("echo_ladder supports only kick_convention = per_period".into()));
    }
    let n = &cfg.numerics;
    let params = ModelParams::new(cfg.omega0, cfg.hbar, cfg.g0, TruncationPolicy::new(MIN_DIM, n.tail_tol)?)?;
    let spec = InitialSpec::from_delta_cap(cfg.delta_cap, cfg.hbar)?.with_weight_cutoff(n.weight_cutoff);
    let dim0 = required_initial_dim(&spec, &params).max(MIN_DIM).div_ceil(MIN_DIM) * MIN_DIM;
    if dim0 > n.dim_ceiling {
        return Err(CliError::Ceiling(format!("initial state needs dim {dim0}")));
    }
    let params = params.with_dim(dim0);
    let initial = build_initial(&spec, &params)?;
    let t_rev = cfg.reversal_time;

    let mut ev = AdaptiveEvolver::new(&params, n.dim_ceiling)?;
    let fwd = run_forward(&initial, &mut ev, t_rev, 1)?;
    let m2_t = fwd.spectrum_at_reversal.m2();
    let xi_c = critical_strength(m2_t);
    let mut logs = vec![log_for("forward", &initial, &ev)];

    let mut curves = Table::new("echo_curves", &["curve", "l", "xi", "t", "m2", "sqrt_m2"]);
    for &(t, m2) in &fwd.series {
        curves.push(vec!["forward".into(), String::new(), fmt_f64(0.0), t.to_string(), fmt_f64(m2), fmt_f64(m2.max(0.0).sqrt())]);
    }
    let mut rungs = Vec::new();
    let mut checks = Vec::new();
    let push_curve = |curves: &mut Table, l: Option<i32>, rec: &EchoRecord| {
        let tag = l.map_or("zero".to_string(), |l| l.to_string());
        for &(t, m2) in &rec.backward {
            curves.push(vec![
                "backward".into(),
                tag.clone(),
                fmt_f64(rec.xi),
                t.to_string(),
                fmt_f64(m2),
                fmt_f64(m2.max(0.0).sqrt()),
            ]);
        }
    };

    if cfg.include_zero {
        let start = Instant::now();
        let mut e = ev.clone();
        let rec = run_echo_from(&initial, &fwd, &mut e, &EchoProtocol::new(t_rev, 0.0)?)?;
        rungs.push(summary(None, &rec, &e, start.elapsed().as_secs_f64()));
        logs.push(log_for("echo xi=0", &initial, &e));
        checks.push(Check::invariant(
            "exact_reversibility",
            (rec.fidelity - 1.0).abs() <= FIDELITY_TOL && rec.max_deviation <= DEVIATION_TOL,
            format!("|F - 1| = {:e}, max amplitude deviation {:e}", (rec.fidelity - 1.0).abs(), rec.max_deviation),
        ));
        let worst = retrace_error(&fwd.series, &rec.backward, t_rev);
        checks.push(Check::invariant(
            "unperturbed_retrace",
            worst <= RETRACE_TOL,
            format!("largest relative gap between backward and reversed forward m2: {worst:e}"),
        ));
        push_curve(&mut curves, None, &rec);
    }

    let ladder_params =
        ModelParams::new(cfg.omega0, cfg.hbar, cfg.g0, TruncationPolicy::new(dim0, cfg.ladder_tail_tol)?)?;
    let ladder_ev = AdaptiveEvolver::new(&ladder_params, n.dim_ceiling)?;
    for &l in &cfg.ladder {
        let start = Instant::now();
        let xi = xi_c * (-(l as f64) / 2.0).exp();
        let mut e = ladder_ev.clone();
        let rec = run_echo_from(&initial, &fwd, &mut e, &EchoProtocol::new(t_rev, xi)?)?;
        rungs.push(summary(Some(l), &rec, &e, start.elapsed().as_secs_f64()));
        logs.push(log_for(&format!("echo l={l}"), &initial, &e));
        push_curve(&mut curves, Some(l), &rec);
    }

    let worst_forms = rungs.iter().map(|r| (r.fidelity - r.fidelity_at_reversal).abs()).fold(0.0, f64::max);
    checks.push(Check::invariant(
        "trace_forms_agree",
        worst_forms <= TRACE_FORM_TOL,
        format!("largest gap between the two fidelity forms: {worst_forms:e}"),
    ));
    let rung = |l: i32| rungs.iter().find(|r| r.l == Some(l));
    if let Some(r) = rung(SMALL_RUNG.0) {
        checks.push(Check::new(
            "small_perturbation_reversible",
            r.fidelity >= SMALL_RUNG.1,
            format!("F(l={}) = {} (need >= {})", SMALL_RUNG.0, r.fidelity, SMALL_RUNG.1),
        ));
    }
    if let Some(r) = rung(LARGE_RUNG.0) {
        checks.push(Check::new(
            "large_perturbation_irreversible",
            r.fidelity <= LARGE_RUNG.1,
            format!("F(l={}) = {} (need <= {})", LARGE_RUNG.0, r.fidelity, LARGE_RUNG.1),
        ));
    }
    let inversions = (cfg.ladder.len() >= 2).then(|| minimum_inversions(&rungs));
    if let Some(k) = inversions {
        checks.push(Check::new(
            "minima_ordered",
            k <= MAX_INVERSIONS,
            format!("{k} adjacent inversions of the backward minima"),
        ));
    }

    let mut summary_table = Table::new(
        "echo_summary",
        &["l", "xi", "fidelity", "fidelity_at_reversal", "t_min", "m2_min", "sqrt_m2_min", "max_deviation", "peak_dim"],
    );
    for r in &rungs {
        summary_table.push(vec![
            r.l.map_or("zero".to_string(), |l| l.to_string()),
            fmt_f64(r.xi),
            fmt_f64(r.fidelity),
            fmt_f64(r.fidelity_at_reversal),
            r.t_min.to_string(),
            fmt_f64(r.m2_min),
            fmt_f64(r.m2_min.max(0.0).sqrt()),
            fmt_f64(r.max_deviation),
            r.peak_dim.to_string(),
        ]);
    }
    Ok(EchoOutcome {
        tables: vec![curves, summary_table],
        logs,
        derived: EchoDerived { m2_at_reversal: m2_t, xi_c, rungs, minimum_inversions: inversions },
        checks,
    })
}

fn log_for(label: &str, initial: &kicked_harmonics::model::DensityState, ev: &AdaptiveEvolver) -> TruncationLog {
    TruncationLog {
        label: label.to_string(),
        members: initial.n_members(),
        discarded_weight: initial.discarded_weight(),
        initial_dim: initial.dim(),
        peak_dim: ev.peak_dim(),
        resizes: ev.escalations.clone(),
        max_tail_mass: ev.max_tail_mass(),
        stopped_at: None,
        stop_reason: None,
        work: None,
    }
}

/// Largest `|m2_back(2T - t) - m2_fwd(t)| / max(1, m2_fwd(t))`.
pub fn retrace_error(forward: &[(usize, f64)], backward: &[(usize, f64)], t_rev: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for &(t, b) in backward {
        if let Some(&(_, f)) = forward.iter().find(|r| r.0 + t == 2 * t_rev) {
            worst = worst.max((b - f).abs() / f.abs().max(1.0));
        }
    }
    worst
}
