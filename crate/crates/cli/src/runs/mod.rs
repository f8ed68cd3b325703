//! Scenario runners. Each returns its tables, truncation logs, derived
//! quantities and checks; `crate::execute` persists them.

pub mod classical;
pub mod crossover;
pub mod echo;
pub mod growth;
pub mod inset;
pub mod validate;

use kicked_harmonics::harmonics::m2_direct;
use kicked_harmonics::model::{build_initial, required_initial_dim, InitialSpec, ModelParams, TruncationPolicy};
use kicked_harmonics::propagator::{AdaptiveEvolver, Stepper};
use kicked_harmonics::Error;

use crate::config::{KickConvention, Numerics, OnCeiling};
use crate::output::TruncationLog;
use crate::CliError;

pub(crate) const MIN_DIM: usize = 64;

/// Periods to run before the row labelled `t`.
///
/// Initial states here are isotropic, hence invariant under free evolution,
/// so an extra kick at `t = 0` is the same as one extra full period.
pub fn periods_for(t: usize, convention: KickConvention) -> usize {
    match convention {
        KickConvention::PerPeriod => t,
        KickConvention::InitialKick if t == 0 => 0,
        KickConvention::InitialKick => t + 1,
    }
}

pub struct QuantumSeries {
    /// `(t, m2)` including `t = 0`.
    pub rows: Vec<(usize, f64)>,
    pub log: TruncationLog,
}

/// Evolves the isotropic mixture of width `Delta = delta_cap` and records
/// `<m^2>` at `t = 0..=t_max` (or only at `t_max` if `only_final`).
#[allow(clippy::too_many_arguments)]
pub fn quantum_series(
    label: &str,
    omega0: f64,
    hbar: f64,
    g0: f64,
    delta_cap: f64,
    t_max: usize,
    numerics: &Numerics,
    only_final: bool,
) -> Result<QuantumSeries, CliError> {
    let trunc = TruncationPolicy::new(MIN_DIM, numerics.tail_tol)?;
    let params = ModelParams::new(omega0, hbar, g0, trunc)?;
    let spec = InitialSpec::from_delta_cap(delta_cap, hbar)?.with_weight_cutoff(numerics.weight_cutoff);
    let dim0 = required_initial_dim(&spec, &params).max(MIN_DIM).div_ceil(MIN_DIM) * MIN_DIM;
    if dim0 > numerics.dim_ceiling {
        return Err(CliError::Ceiling(format!("{label}: initial state needs dim {dim0}")));
    }
    let params = params.with_dim(dim0);
    let initial = build_initial(&spec, &params)?;
    let mut log = TruncationLog {
        label: label.to_string(),
        members: initial.n_members(),
        discarded_weight: initial.discarded_weight(),
        initial_dim: dim0,
        peak_dim: dim0,
        resizes: Vec::new(),
        max_tail_mass: initial.tail_mass(),
        stopped_at: None,
        stop_reason: None,
        work: Some(0.0),
    };
    let mut ev = AdaptiveEvolver::new(&params, numerics.dim_ceiling)?;
    let mut rows = Vec::new();
    if !only_final || t_max == 0 {
        rows.push((0, m2_direct(&initial)));
    }
    let last_period = periods_for(t_max, numerics.kick_convention);
    let mut cur = initial;
    let mut work = 0.0;
    for s in 1..=last_period {
        let cost = step_cost(cur.n_members(), ev.dim());
        if let Some(limit) = numerics.work_limit {
            if work + cost > limit {
                if only_final {
                    return Err(CliError::Ceiling(format!("{label}: work limit reached at period {s}")));
                }
                log.stopped_at = Some(rows.last().map_or(0, |r| r.0));
                log.stop_reason = Some("work_limit".into());
                break;
            }
        }
        work += cost;
        match ev.forward(&cur, s) {
            Ok(next) => cur = next,
            Err(Error::CeilingReached { ceiling, needed }) => {
                let reached = rows.last().map_or(0, |r| r.0);
                if numerics.on_ceiling == OnCeiling::Stop && !only_final {
                    log.stopped_at = Some(reached);
                    log.stop_reason = Some("dim_ceiling".into());
                    break;
                }
                return Err(CliError::Ceiling(format!(
                    "{label}: dim {needed} needed at period {s}, ceiling {ceiling}"
                )));
            }
            Err(e) => return Err(e.into()),
        }
        let label_t = match numerics.kick_convention {
            KickConvention::PerPeriod => Some(s),
            KickConvention::InitialKick => s.checked_sub(1).filter(|&t| t >= 1),
        };
        if let Some(t) = label_t {
            if !only_final || t == t_max {
                rows.push((t, m2_direct(&cur)));
            }
        }
    }
    log.work = Some(work);
    log.peak_dim = ev.peak_dim();
    log.resizes = ev.escalations.clone();
    log.max_tail_mass = log.max_tail_mass.max(ev.max_tail_mass());
    Ok(QuantumSeries { rows, log })
}

/// Multiply-adds for one period and one `<m^2>` evaluation: the kick
/// product plus the two `K x K` Gram matrices.
fn step_cost(members: usize, dim: usize) -> f64 {
    let (k, d) = (members as f64, dim as f64);
    k * d * d + 2.0 * k * k * d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_kick_shifts_by_one_period() {
        assert_eq!(periods_for(0, KickConvention::InitialKick), 0);
        assert_eq!(periods_for(3, KickConvention::InitialKick), 4);
        assert_eq!(periods_for(3, KickConvention::PerPeriod), 3);
    }

    #[test]
    fn zero_kick_series_is_flat() {
        let n = Numerics::default();
        let s = quantum_series("flat", 1.0, 0.1, 0.0, 0.45, 5, &n, false).unwrap();
        assert_eq!(s.rows.len(), 6);
        assert!(s.rows.iter().all(|r| r.1.abs() < 1e-12), "{:?}", s.rows);
    }

    #[test]
    fn conventions_agree_up_to_relabelling() {
        let per = Numerics::default();
        let init = Numerics { kick_convention: KickConvention::InitialKick, ..Numerics::default() };
        let a = quantum_series("a", 1.0, 0.5, 1.0, 0.0, 4, &per, false).unwrap();
        let b = quantum_series("b", 1.0, 0.5, 1.0, 0.0, 3, &init, false).unwrap();
        for t in 1..=3 {
            assert_eq!(b.rows[t].1, a.rows[t + 1].1);
        }
        assert_eq!(b.rows[0].1, 0.0);
    }
}
