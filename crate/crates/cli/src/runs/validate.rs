//! Invariant suite on random states and short propagations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use kicked_harmonics::classical::{classical_m2, classical_step, sample_initial};
use kicked_harmonics::echo::{fidelity_closed_form, fidelity_linear, peres_fidelity, perturb};
use kicked_harmonics::harmonics::{harmonic_weights, m2_direct};
use kicked_harmonics::model::{purity, DensityState, ModelParams, Seed, TruncationPolicy};
use kicked_harmonics::oracle::{m2_from_grid, wigner_on_grid, GridSpec};
use kicked_harmonics::propagator::{build_floquet, step, step_inverse};
use kicked_harmonics::random::{random_state, rng};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::config::ValidateConfig;
use crate::output::{fmt_f64, Check, Table};
use crate::CliError;

pub const IDENTITY_TOL: f64 = 1e-10;
pub const ORACLE_REL_TOL: f64 = 1e-6;
pub const FREE_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-12;
pub const ROUND_TRIP_TOL: f64 = 1e-12;
/// Classical free-motion estimates must stay within this many sigma of 0.
pub const SHOT_NOISE_SIGMAS: f64 = 5.0;
const FREE_PERIODS: usize = 100;
const CLASSICAL_TRAJ: usize = 20_000;
const CLASSICAL_PERIODS: usize = 20;
const ORACLE_HBARS: [f64; 3] = [1.0, 0.1, 0.37];

#[derive(Clone, Debug, Serialize)]
pub struct CheckTiming {
    pub name: String,
    pub worst: f64,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateDerived {
    pub timings: Vec<CheckTiming>,
}

pub struct ValidateOutcome {
    pub tables: Vec<Table>,
    pub derived: ValidateDerived,
    pub checks: Vec<Check>,
}

struct Suite {
    checks: Vec<Check>,
    timings: Vec<CheckTiming>,
}

impl Suite {
    fn record(&mut self, name: &str, tol: f64, f: impl FnOnce() -> Result<f64, CliError>) -> Result<(), CliError> {
        let start = Instant::now();
        let worst = f()?;
        let seconds = start.elapsed().as_secs_f64();
        self.checks.push(Check::invariant(name, worst <= tol, format!("worst {worst:e} (tolerance {tol:e})")));
        self.timings.push(CheckTiming { name: name.to_string(), worst, seconds });
        Ok(())
    }
}

pub fn run(cfg: &ValidateConfig, seed: u64) -> Result<ValidateOutcome, CliError> {
    let mut suite = Suite { checks: Vec::new(), timings: Vec::new() };

    suite.record("closed_form_identity", IDENTITY_TOL, || {
        let mut r = rng(seed);
        let mut worst: f64 = 0.0;
        for i in 0..cfg.random_states {
            let dim = r.random_range(2..=cfg.max_dim);
            let s = random_state(&mut r, dim, dim, 1 + i % 5);
            let spec = harmonic_weights(&s);
            for _ in 0..cfg.xi_samples {
                let xi = r.random_range(0.0..=PI);
                let direct = peres_fidelity(&perturb(&s, xi), &s)?;
                worst = worst.max((direct - fidelity_closed_form(&spec, xi)).abs());
            }
        }
        Ok(worst)
    })?;

    suite.record("fidelity_bounds", 0.0, || {
        let mut r = rng(seed ^ 0x5eed);
        let mut excess: f64 = 0.0;
        for i in 0..cfg.random_states {
            let dim = r.random_range(2..=cfg.max_dim);
            let s = random_state(&mut r, dim, dim, 1 + i % 5);
            let spec = harmonic_weights(&s);
            let off: f64 = spec.iter().filter(|(m, _)| *m != 0).map(|(_, p)| p).sum();
            let lower = (1.0 - 2.0 * off).max(0.0);
            for _ in 0..cfg.xi_samples {
                let xi = r.random_range(0.0..=PI);
                let f = fidelity_closed_form(&spec, xi);
                excess = excess.max(lower - f - 1e-12).max(f - 1.0 - 1e-12);
                // next-order Taylor bound, meaningful at small xi
                let xs = xi * 0.05;
                let gap = (fidelity_linear(&spec, xs) - fidelity_closed_form(&spec, xs)).abs();
                let bound = xs.powi(4) * spec.moment(4) / 24.0;
                excess = excess.max(gap - bound - 1e-12);
            }
        }
        Ok(excess.max(0.0))
    })?;

    suite.record("oracle_equivalence", ORACLE_REL_TOL, || {
        let mut r = rng(seed.wrapping_add(1));
        let h = FRAC_1_SQRT_2;
        let two_level = DensityState::pure(vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)])?;
        let grid = wigner_on_grid(&two_level, 1.0, &GridSpec::default())?;
        let mut worst = (m2_from_grid(&grid)? - 0.5).abs() / 0.5;
        worst = worst.max((harmonic_weights(&two_level).m2() - 0.5).abs() / 0.5);
        for i in 0..cfg.oracle_states {
            let support = 2 + (i * 5) % (cfg.oracle_support - 1);
            let s = random_state(&mut r, cfg.oracle_support, support, 1 + i % 4);
            let hbar = ORACLE_HBARS[i % ORACLE_HBARS.len()];
            let grid = wigner_on_grid(&s, hbar, &GridSpec::default())?;
            let oracle = m2_from_grid(&grid)?;
            let analyzer = harmonic_weights(&s).m2();
            worst = worst.max((oracle - analyzer).abs() / analyzer.max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    })?;

    let dim = cfg.max_dim.max(16);
    let support = dim / 8;
    let trunc = TruncationPolicy::new(dim, 1e-12)?;

    suite.record("free_evolution_invariance", FREE_TOL, || {
        let op = build_floquet(&ModelParams::new(1.0, 1.0, 0.0, trunc)?)?;
        let mut r = rng(seed.wrapping_add(2));
        let mut s = random_state(&mut r, dim, dim / 2, 3);
        let m0 = m2_direct(&s);
        let mut worst: f64 = 0.0;
        for _ in 0..FREE_PERIODS {
            s = step(&s, &op)?;
            worst = worst.max((m2_direct(&s) - m0).abs() / m0);
        }
        Ok(worst)
    })?;

    suite.record("norm_and_purity_conservation", NORM_TOL, || {
        let op = build_floquet(&ModelParams::new(1.0, 1.0, 0.1, trunc)?)?;
        let mut r = rng(seed.wrapping_add(3));
        let mut s = random_state(&mut r, dim, support, 3);
        let p0 = purity(&s);
        let mut worst: f64 = 0.0;
        for _ in 0..FREE_PERIODS {
            s = step(&s, &op)?;
            let trace: f64 = s.populations().iter().sum();
            worst = worst.max((trace - 1.0).abs()).max((purity(&s) - p0).abs());
        }
        Ok(worst)
    })?;

    suite.record("round_trip", ROUND_TRIP_TOL, || {
        let op = build_floquet(&ModelParams::new(1.0, 1.0, 0.1, trunc)?)?;
        let mut r = rng(seed.wrapping_add(4));
        let s0 = random_state(&mut r, dim, support, 2);
        let mut s = s0.clone();
        for _ in 0..CLASSICAL_PERIODS {
            s = step(&s, &op)?;
        }
        for _ in 0..CLASSICAL_PERIODS {
            s = step_inverse(&s, &op)?;
        }
        Ok(s.amplitudes().iter().zip(s0.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    })?;

    suite.record("classical_free_invariance", SHOT_NOISE_SIGMAS, || {
        let params = ModelParams::new(1.0, 1.0, 0.0, TruncationPolicy::new(2, 1.0)?)?;
        let mut ens = sample_initial(0.5, CLASSICAL_TRAJ, Seed(seed))?;
        let mut worst: f64 = 0.0;
        for t in 0..=CLASSICAL_PERIODS {
            if t > 0 {
                ens = classical_step(&ens, &params);
            }
            let est = classical_m2(&ens, 32, 64)?;
            worst = worst.max(est.m2_unclamped.abs() / est.m2_sigma);
        }
        Ok(worst)
    })?;

    let mut table = Table::new("validate", &["check", "pass", "worst"]);
    for (c, t) in suite.checks.iter().zip(&suite.timings) {
        table.push(vec![c.name.clone(), c.pass.to_string(), fmt_f64(t.worst)]);
    }
    Ok(ValidateOutcome {
        tables: vec![table],
        derived: ValidateDerived { timings: suite.timings },
        checks: suite.checks,
    })
}
