//! Classical ensemble series and the `classical_growth` scenario.

use kicked_harmonics::classical::{classical_m2_adaptive, mean_action, sample_initial, TangentEnsemble};
use kicked_harmonics::fit::linear_fit;
use kicked_harmonics::model::{ModelParams, Seed, TruncationPolicy};
use serde::Serialize;

use crate::analysis::{exponential_window, ExpFit, NoisyPoint};
use crate::config::{ClassicalGrowthConfig, ClassicalSettings, KickConvention};
use crate::output::{fmt_f64, Check, Table};
use crate::runs::periods_for;
use crate::CliError;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassicalPoint {
    pub t: usize,
    /// Tangent-map (Liouville) estimate and its standard error.
    pub m2: f64,
    pub m2_sigma: f64,
    /// Action-binned estimate: clamped, unclamped, shot-noise sigma.
    pub m2_binned: f64,
    pub m2_binned_unclamped: f64,
    pub binned_sigma: f64,
    pub m_max: usize,
    pub flagged: bool,
    pub mean_action: f64,
}

impl ClassicalPoint {
    pub fn noisy(&self) -> NoisyPoint {
        NoisyPoint { t: self.t, m2: self.m2, sigma: self.m2_sigma, flagged: false }
    }
}

pub fn classical_series(
    omega0: f64,
    g0: f64,
    delta: f64,
    settings: &ClassicalSettings,
    seed: u64,
    t_max: usize,
    convention: KickConvention,
) -> Result<Vec<ClassicalPoint>, CliError> {
    // the classical map ignores hbar and the truncation policy
    let params = ModelParams::new(omega0, 1.0, g0, TruncationPolicy::new(2, 1.0)?)?;
    let mut ens = TangentEnsemble::new(sample_initial(delta, settings.n_traj, Seed(seed))?, delta)?;
    let mut out = Vec::with_capacity(t_max + 1);
    let mut record = |t: usize, ens: &TangentEnsemble| {
        let binned = classical_m2_adaptive(&ens.ensemble, settings.n_bins, settings.m_max, settings.m_cap)?;
        let exact = ens.m2();
        out.push(ClassicalPoint {
            t,
            m2: exact.m2,
            m2_sigma: exact.sigma,
            m2_binned: binned.m2(),
            m2_binned_unclamped: binned.m2_unclamped,
            binned_sigma: binned.m2_sigma,
            m_max: binned.m_max,
            flagged: binned.flagged,
            mean_action: mean_action(&ens.ensemble),
        });
        Ok::<(), CliError>(())
    };
    record(0, &ens)?;
    for s in 1..=periods_for(t_max, convention) {
        ens = ens.step(&params);
        let t = match convention {
            KickConvention::PerPeriod => s,
            KickConvention::InitialKick if s >= 2 => s - 1,
            KickConvention::InitialKick => continue,
        };
        record(t, &ens)?;
    }
    Ok(out)
}

pub const CLASSICAL_COLUMNS: [&str; 11] = [
    "t",
    "m2_classical",
    "mean_action",
    "n_traj",
    "seed",
    "m2_sigma",
    "m2_binned",
    "m2_binned_unclamped",
    "binned_sigma",
    "m_max",
    "flagged",
];

pub fn classical_table(name: &str, points: &[ClassicalPoint], n_traj: usize, seed: u64) -> Table {
    let mut table = Table::new(name, &CLASSICAL_COLUMNS);
    for p in points {
        table.push(vec![
            p.t.to_string(),
            fmt_f64(p.m2),
            fmt_f64(p.mean_action),
            n_traj.to_string(),
            seed.to_string(),
            fmt_f64(p.m2_sigma),
            fmt_f64(p.m2_binned),
            fmt_f64(p.m2_binned_unclamped),
            fmt_f64(p.binned_sigma),
            p.m_max.to_string(),
            p.flagged.to_string(),
        ]);
    }
    table
}

/// Relative tolerance on the diffusion coefficient.
pub const DIFFUSION_TOL: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalDerived {
    pub diffusion_slope: f64,
    pub diffusion_r2: f64,
    pub expected_slope: f64,
    pub exponential_fit: Option<ExpFit>,
}

pub struct ClassicalOutcome {
    pub table: Table,
    pub points: Vec<ClassicalPoint>,
    pub derived: ClassicalDerived,
    pub checks: Vec<Check>,
}

pub fn run(cfg: &ClassicalGrowthConfig, seed: u64) -> Result<ClassicalOutcome, CliError> {
    let points =
        classical_series(cfg.omega0, cfg.g0, cfg.delta_small, &cfg.classical, seed, cfg.t_max, cfg.kick_convention)?;
    let xs: Vec<f64> = points.iter().map(|p| p.t as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_action).collect();
    let fit = linear_fit(&xs, &ys).ok_or_else(|| CliError::Config("need t_max >= 1".into()))?;
    let expected = cfg.g0 * cfg.g0;
    let exp_fit = exponential_window(&points.iter().map(ClassicalPoint::noisy).collect::<Vec<_>>());
    let mut checks = Vec::new();
    if expected > 0.0 {
        let rel = (fit.slope - expected).abs() / expected;
        checks.push(Check::new(
            "diffusion_coefficient",
            rel <= DIFFUSION_TOL,
            format!("slope {} vs g0^2 {} (relative error {})", fit.slope, expected, rel),
        ));
    } else {
        let flat = points.iter().all(|p| p.m2.abs() <= 1e-12 && p.m2_binned_unclamped.abs() <= 5.0 * p.binned_sigma);
        checks.push(Check::invariant(
            "free_motion_isotropic",
            flat,
            "g0 = 0: tangent m2 below 1e-12, binned m2 within 5 sigma of 0".into(),
        ));
    }
    Ok(ClassicalOutcome {
        table: classical_table("classical_growth", &points, cfg.classical.n_traj, seed),
        derived: ClassicalDerived {
            diffusion_slope: fit.slope,
            diffusion_r2: fit.r2,
            expected_slope: expected,
            exponential_fit: exp_fit,
        },
        points,
        checks,
    })
}
