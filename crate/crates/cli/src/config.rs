//! Run configuration. One TOML file may carry sections for every scenario;
//! only the section of the invoked scenario is used. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Growth,
    EchoLadder,
    CrossoverScan,
    IntegrableInset,
    ClassicalGrowth,
    Validate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Growth => "growth",
            Scenario::EchoLadder => "echo_ladder",
            Scenario::CrossoverScan => "crossover_scan",
            Scenario::IntegrableInset => "integrable_inset",
            Scenario::ClassicalGrowth => "classical_growth",
            Scenario::Validate => "validate",
        }
    }
}

/// How many kicks have acted by the time an observable is sampled at `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickConvention {
    /// Free evolution then kick each period; `t` kicks by time `t`.
    #[default]
    PerPeriod,
    /// An extra kick at `t = 0`, sampled just after each kick; `t + 1` kicks
    /// by time `t`. The `t = 0` row is the unkicked initial state.
    InitialKick,
}

/// What to do when the Fock basis would exceed `dim_ceiling`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnCeiling {
    /// Abort the run (exit code 3).
    #[default]
    Fail,
    /// End that series at the last admissible time and record it.
    Stop,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub tail_tol: f64,
    pub dim_ceiling: usize,
    /// Cumulative thermal weight dropped from the initial mixture.
    pub weight_cutoff: f64,
    pub kick_convention: KickConvention,
    pub on_ceiling: OnCeiling,
    /// Per-series budget in complex multiply-adds (propagation plus
    /// observables); a series that would exceed it ends early and is marked
    /// as stopped. Deterministic, unlike a wall-clock limit.
    pub work_limit: Option<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tail_tol: 1e-12,
            dim_ceiling: 8192,
            weight_cutoff: 1e-10,
            kick_convention: KickConvention::PerPeriod,
            on_ceiling: OnCeiling::Fail,
            work_limit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSettings {
    pub n_traj: usize,
    pub n_bins: usize,
    /// Starting harmonic cutoff at every time; doubled while the tail flag
    /// is raised. Each unresolved harmonic adds noise weighted by `m^2`, so
    /// this starts small.
    pub m_max: usize,
    pub m_cap: usize,
}

impl Default for ClassicalSettings {
    fn default() -> Self {
        ClassicalSettings { n_traj: 100_000, n_bins: 64, m_max: 16, m_cap: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrowthConfig {
    pub omega0: f64,
    pub g0: f64,
    /// Total initial width `delta = Delta + hbar/2`, fixed across `hbar`.
    pub delta_small: f64,
    pub hbar: Vec<f64>,
    pub t_max: usize,
    pub classical_t_max: usize,
    /// A quantum curve departs once `m2_quantum / m2_classical` drops below this.
    pub departure_ratio: f64,
    pub classical: ClassicalSettings,
    pub numerics: Numerics,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            omega0: 1.0,
            g0: 1.5,
            delta_small: 0.5,
            hbar: vec![1.0, 0.1, 0.01],
            t_max: 12,
            classical_t_max: 12,
            departure_ratio: 0.5,
            classical: ClassicalSettings::default(),
            numerics: Numerics { on_ceiling: OnCeiling::Stop, ..Numerics::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EchoLadderConfig {
    pub omega0: f64,
    pub hbar: f64,
    pub g0: f64,
    pub delta_cap: f64,
    pub reversal_time: usize,
    /// Ladder indices `l`; `xi = xi_c exp(-l/2)`.
    pub ladder: Vec<i32>,
    /// Also run the unperturbed echo as an exactness check.
    pub include_zero: bool,
    /// Tail tolerance for the perturbed backward legs. The forward leg and
    /// the unperturbed echo use `numerics.tail_tol`.
    pub ladder_tail_tol: f64,
    pub numerics: Numerics,
}

impl Default for EchoLadderConfig {
    fn default() -> Self {
        EchoLadderConfig {
            omega0: 1.0,
            hbar: 1.0,
            g0: 2.0,
            delta_cap: 1.0,
            reversal_time: 50,
            ladder: (-6..=8).rev().collect(),
            include_zero: true,
            ladder_tail_tol: 1e-9,
            numerics: Numerics { tail_tol: 1e-14, dim_ceiling: 12_288, ..Numerics::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossoverConfig {
    pub omega0: f64,
    pub hbar: f64,
    pub delta_cap: f64,
    pub time: usize,
    pub g0_min: f64,
    pub g0_max: f64,
    pub g0_step: f64,
    pub numerics: Numerics,
}

impl Default for CrossoverConfig {
    fn default() -> Self {
        CrossoverConfig {
            omega0: 1.0,
            hbar: 0.01,
            delta_cap: 0.0,
            time: 3,
            g0_min: 0.0,
            g0_max: 1.5,
            g0_step: 0.05,
            numerics: Numerics::default(),
        }
    }
}

impl CrossoverConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.g0_max - self.g0_min) / self.g0_step + 1e-9).floor() as usize;
        // rounded so grid labels print cleanly
        (0..=n).map(|i| ((self.g0_min + self.g0_step * i as f64) * 1e12).round() / 1e12).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsetConfig {
    pub omega0: f64,
    pub g0: f64,
    pub delta_small: f64,
    pub hbar: Vec<f64>,
    /// Periods per curve, one entry per `hbar` (or a single shared value).
    pub t_max: Vec<usize>,
    /// Minimum R^2 of the linear fit of `sqrt(m2)` over the initial window.
    pub r2_min: f64,
    pub min_window: usize,
    pub numerics: Numerics,
}

/// Per-series budget of the inset scenario, about 100 s single-core.
pub const INSET_WORK_LIMIT: f64 = 2e11;

impl Default for InsetConfig {
    fn default() -> Self {
        InsetConfig {
            omega0: 1.0,
            g0: 1.0,
            delta_small: 0.5,
            hbar: vec![1.0, 0.1, 0.05, 0.02, 0.01, 0.005],
            t_max: vec![60],
            r2_min: 0.98,
            min_window: 4,
            numerics: Numerics {
                on_ceiling: OnCeiling::Stop,
                weight_cutoff: 1e-6,
                work_limit: Some(INSET_WORK_LIMIT),
                ..Numerics::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalGrowthConfig {
    pub omega0: f64,
    pub g0: f64,
    pub delta_small: f64,
    pub t_max: usize,
    pub classical: ClassicalSettings,
    pub kick_convention: KickConvention,
}

impl Default for ClassicalGrowthConfig {
    fn default() -> Self {
        ClassicalGrowthConfig {
            omega0: 1.0,
            g0: 1.5,
            delta_small: 0.5,
            t_max: 20,
            classical: ClassicalSettings::default(),
            kick_convention: KickConvention::PerPeriod,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub random_states: usize,
    pub oracle_states: usize,
    pub oracle_support: usize,
    pub xi_samples: usize,
    pub max_dim: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig { random_states: 50, oracle_states: 20, oracle_support: 16, xi_samples: 20, max_dim: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// If present, must name the invoked scenario.
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub growth: GrowthConfig,
    pub echo_ladder: EchoLadderConfig,
    pub crossover_scan: CrossoverConfig,
    pub integrable_inset: InsetConfig,
    pub classical_growth: ClassicalGrowthConfig,
    pub validate: ValidateConfig,
}

pub const DEFAULT_SEED: u64 = 20_090_101;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks the section used by `scenario`.
    pub fn validate_for(&self, scenario: Scenario) -> Result<(), CliError> {
        if let Some(s) = self.scenario {
            if s != scenario {
                return Err(CliError::Config(format!(
                    "config is for scenario {}, invoked {}",
                    s.name(),
                    scenario.name()
                )));
            }
        }
        let fail = |msg: String| Err(CliError::Config(msg));
        let check_numerics = |n: &Numerics| -> Result<(), CliError> {
            if !(n.tail_tol > 0.0 && n.tail_tol < 1.0) {
                return fail(format!("tail_tol must be in (0, 1), got {}", n.tail_tol));
            }
            if n.dim_ceiling < 16 {
                return fail(format!("dim_ceiling must be >= 16, got {}", n.dim_ceiling));
            }
            if n.work_limit.is_some_and(|w| !(w > 0.0)) {
                return fail("work_limit must be positive".into());
            }
            if !(n.weight_cutoff > 0.0 && n.weight_cutoff < 1.0) {
                return fail(format!("weight_cutoff must be in (0, 1), got {}", n.weight_cutoff));
            }
            Ok(())
        };
        let check_hbar = |h: &[f64]| -> Result<(), CliError> {
            if h.is_empty() || h.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return fail("hbar values must be positive".into());
            }
            Ok(())
        };
        let check_classical = |c: &ClassicalSettings| -> Result<(), CliError> {
            if c.n_bins == 0 || c.n_traj < 2 * c.n_bins {
                return fail(format!("need n_traj >= 2 n_bins, got {} and {}", c.n_traj, c.n_bins));
            }
            if c.m_max == 0 || c.m_cap < c.m_max {
                return fail("need 0 < m_max <= m_cap".into());
            }
            Ok(())
        };
        match scenario {
            Scenario::Growth => {
                let g = &self.growth;
                check_numerics(&g.numerics)?;
                check_hbar(&g.hbar)?;
                check_classical(&g.classical)?;
                if g.hbar.iter().any(|h| h / 2.0 > g.delta_small) {
                    return fail("delta_small must be at least hbar/2 for every hbar".into());
                }
                if !(g.departure_ratio > 0.0 && g.departure_ratio < 1.0) {
                    return fail("departure_ratio must be in (0, 1)".into());
                }
            }
            Scenario::EchoLadder => {
                let e = &self.echo_ladder;
                check_numerics(&e.numerics)?;
                check_hbar(&[e.hbar])?;
                if e.reversal_time == 0 {
                    return fail("reversal_time must be positive".into());
                }
                if !(e.delta_cap >= 0.0) {
                    return fail("delta_cap must be >= 0".into());
                }
                if !(e.ladder_tail_tol > 0.0 && e.ladder_tail_tol < 1.0) {
                    return fail(format!("ladder_tail_tol must be in (0, 1), got {}", e.ladder_tail_tol));
                }
                if e.ladder.is_empty() && !e.include_zero {
                    return fail("empty echo ladder".into());
                }
            }
            Scenario::CrossoverScan => {
                let c = &self.crossover_scan;
                check_numerics(&c.numerics)?;
                check_hbar(&[c.hbar])?;
                if !(c.g0_step > 0.0) || c.g0_min < 0.0 || c.g0_max < c.g0_min {
                    return fail("need 0 <= g0_min <= g0_max and g0_step > 0".into());
                }
                if c.time == 0 {
                    return fail("time must be positive".into());
                }
            }
            Scenario::IntegrableInset => {
                let i = &self.integrable_inset;
                check_numerics(&i.numerics)?;
                check_hbar(&i.hbar)?;
                if i.t_max.is_empty() || (i.t_max.len() != 1 && i.t_max.len() != i.hbar.len()) {
                    return fail("t_max needs one entry or one per hbar".into());
                }
                if i.hbar.iter().any(|h| h / 2.0 > i.delta_small) {
                    return fail("delta_small must be at least hbar/2 for every hbar".into());
                }
                if i.min_window < 3 {
                    return fail("min_window must be >= 3".into());
                }
            }
            Scenario::ClassicalGrowth => {
                let c = &self.classical_growth;
                check_classical(&c.classical)?;
                if !(c.delta_small > 0.0) {
                    return fail("delta_small must be positive".into());
                }
            }
            Scenario::Validate => {
                let v = &self.validate;
                if v.random_states == 0 || v.oracle_states == 0 || v.xi_samples == 0 {
                    return fail("validate counts must be positive".into());
                }
                if v.oracle_support > 32 || v.oracle_support < 2 {
                    return fail("oracle_support must be in 2..=32".into());
                }
                if v.max_dim < 2 {
                    return fail("max_dim must be >= 2".into());
                }
            }
        }
        Ok(())
    }
}

impl InsetConfig {
    pub fn t_max_for(&self, index: usize) -> usize {
        if self.t_max.len() == 1 {
            self.t_max[0]
        } else {
            self.t_max[index]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_reference_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.growth.hbar, vec![1.0, 0.1, 0.01]);
        assert_eq!(cfg.echo_ladder.ladder.first(), Some(&8));
        assert_eq!(cfg.echo_ladder.ladder.last(), Some(&-6));
        assert_eq!(cfg.crossover_scan.grid().len(), 31);
        for s in [
            Scenario::Growth,
            Scenario::EchoLadder,
            Scenario::CrossoverScan,
            Scenario::IntegrableInset,
            Scenario::ClassicalGrowth,
            Scenario::Validate,
        ] {
            cfg.validate_for(s).unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("[growth]\nhbaar = [1.0]\n").is_err());
        assert!(ExperimentConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let cfg = ExperimentConfig::from_toml("scenario = \"growth\"\n").unwrap();
        assert!(cfg.validate_for(Scenario::EchoLadder).is_err());
        assert!(cfg.validate_for(Scenario::Growth).is_ok());
    }

    #[test]
    fn inconsistent_widths_are_rejected() {
        let cfg = ExperimentConfig::from_toml("[growth]\ndelta_small = 0.1\nhbar = [1.0]\n").unwrap();
        assert!(cfg.validate_for(Scenario::Growth).is_err());
    }
}
