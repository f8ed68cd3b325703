//! Forward–perturb–backward echo protocol and Peres fidelity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{harmonic_weights, m2_direct, HarmonicSpectrum};
use crate::linalg::{cross_gram, CompensatedSum};
use crate::model::{purity, DensityState};
use crate::propagator::Stepper;

/// Agreement required between the initial-time and reversal-time forms of
/// the fidelity.
pub const TRACE_FORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// `P(xi) = exp(-i xi n)`.
    #[default]
    PhaseRotation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoProtocol {
    pub reversal_time: usize,
    pub xi: f64,
    pub perturbation: Perturbation,
    pub record_every: usize,
}

impl EchoProtocol {
    pub fn new(reversal_time: usize, xi: f64) -> Result<Self> {
        let p = EchoProtocol {
            reversal_time,
            xi,
            perturbation: Perturbation::PhaseRotation,
            record_every: 1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reversal_time < 1 {
            return Err(Error::InvalidParam("reversal time must be >= 1".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidParam("record_every must be >= 1".into()));
        }
        if !self.xi.is_finite() {
            return Err(Error::InvalidParam("xi must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EchoRecord {
    pub xi: f64,
    /// `(t, <m^2>)` for `t` in `0..=T`.
    pub forward: Vec<(usize, f64)>,
    /// `(t, <m^2>)` for `t` in `T..=2T`, `t` counted as elapsed protocol time.
    /// The first row is the perturbed state at the reversal time.
    pub backward: Vec<(usize, f64)>,
    /// `F(xi; T)` from the reversed state against the initial state.
    pub fidelity: f64,
    /// The same quantity evaluated at the reversal time.
    pub fidelity_at_reversal: f64,
    /// Minimum of `<m^2>` over the backward leg.
    pub minimum: (usize, f64),
    /// Largest amplitude difference between the reversed and initial state.
    pub max_deviation: f64,
}

/// `n`-th amplitude of every member multiplied by `exp(-i xi n)`.
pub fn perturb(state: &DensityState, xi: f64) -> DensityState {
    let phases: Vec<Complex64> = (0..state.dim())
        .map(|n| Complex64::from_polar(1.0, -xi * n as f64))
        .collect();
    state.map_members(|v| {
        for (a, ph) in v.iter_mut().zip(&phases) {
            *a *= ph;
        }
    })
}

/// `Tr[rho_a rho_b] / Tr[rho_b^2]`, with `b` the unperturbed reference.
pub fn peres_fidelity(a: &DensityState, b: &DensityState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { expected: b.dim(), got: a.dim() });
    }
    let (ka, kb) = (a.n_members(), b.n_members());
    let gram = cross_gram(a.amplitudes(), ka, b.amplitudes(), kb, a.dim());
    let mut overlap = CompensatedSum::default();
    for j in 0..kb {
        for i in 0..ka {
            overlap.add(a.weights()[i] * b.weights()[j] * gram[j * ka + i].norm_sqr());
        }
    }
    Ok(overlap.value() / purity(b))
}

/// `F = 1 - 2 sum_m sin^2(xi m / 2) P_m` for the phase-rotation perturbation.
pub fn fidelity_closed_form(spec: &HarmonicSpectrum, xi: f64) -> f64 {
    let loss: CompensatedSum = spec
        .iter()
        .map(|(m, p)| {
            let s = (0.5 * xi * m as f64).sin();
            s * s * p
        })
        .collect();
    1.0 - 2.0 * loss.value()
}

/// Lowest-order expansion `1 - xi^2 <m^2> / 2`.
pub fn fidelity_linear(spec: &HarmonicSpectrum, xi: f64) -> f64 {
    1.0 - 0.5 * xi * xi * spec.m2()
}

/// `xi_c = sqrt(2 / <m^2>)`; infinite for an isotropic state.
pub fn critical_strength(m2: f64) -> f64 {
    if m2 <= 0.0 {
        f64::INFINITY
    } else {
        (2.0 / m2).sqrt()
    }
}

/// Pads the smaller of two states so both share one basis.
fn aligned(a: &DensityState, b: &DensityState) -> Result<(DensityState, DensityState)> {
    let dim = a.dim().max(b.dim());
    Ok((a.resized(dim)?, b.resized(dim)?))
}

fn max_deviation(a: &DensityState, b: &DensityState) -> f64 {
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn m2_of(state: &DensityState) -> f64 {
    m2_direct(state)
}

/// Forward evolution to `T`, perturbation, backward evolution to `2T`.
///
/// The forward leg is shared by every `xi`; see [`run_echo_from`] to reuse it.
pub fn run_echo<S: Stepper>(initial: &DensityState, stepper: &mut S, proto: &EchoProtocol) -> Result<EchoRecord> {
    let fwd = run_forward(initial, stepper, proto.reversal_time, proto.record_every)?;
    run_echo_from(initial, &fwd, stepper, proto)
}

/// Recorded forward leg.
#[derive(Clone, Debug)]
pub struct ForwardLeg {
    pub series: Vec<(usize, f64)>,
    pub at_reversal: DensityState,
    pub spectrum_at_reversal: HarmonicSpectrum,
}

pub fn run_forward<S: Stepper>(
    initial: &DensityState,
    stepper: &mut S,
    reversal_time: usize,
    record_every: usize,
) -> Result<ForwardLeg> {
    let mut series = vec![(0, m2_of(initial))];
    let mut cur = initial.clone();
    for t in 1..=reversal_time {
        cur = stepper.forward(&cur, t)?;
        if t % record_every == 0 && t != reversal_time {
            series.push((t, m2_of(&cur)));
        }
    }
    let spectrum_at_reversal = harmonic_weights(&cur);
    series.push((reversal_time, spectrum_at_reversal.m2()));
    Ok(ForwardLeg { series, at_reversal: cur, spectrum_at_reversal })
}

/// Perturb-and-reverse starting from a precomputed forward leg.
pub fn run_echo_from<S: Stepper>(
    initial: &DensityState,
    fwd: &ForwardLeg,
    stepper: &mut S,
    proto: &EchoProtocol,
) -> Result<EchoRecord> {
    proto.validate()?;
    let t_rev = proto.reversal_time;
    let perturbed = perturb(&fwd.at_reversal, proto.xi);
    let fidelity_at_reversal = peres_fidelity(&perturbed, &fwd.at_reversal)?;

    let mut backward = vec![(t_rev, m2_of(&perturbed))];
    let mut cur = perturbed;
    for s in 1..=t_rev {
        cur = stepper.backward(&cur, t_rev + s)?;
        if s % proto.record_every == 0 || s == t_rev {
            backward.push((t_rev + s, m2_of(&cur)));
        }
    }
    let (cur, initial) = aligned(&cur, initial)?;
    let fidelity = peres_fidelity(&cur, &initial)?;
    if (fidelity - fidelity_at_reversal).abs() > TRACE_FORM_TOL {
        return Err(Error::Invariant(format!(
            "fidelity forms disagree: {fidelity} (initial time) vs {fidelity_at_reversal} (reversal time)"
        )));
    }
    let minimum = backward
        .iter()
        .copied()
        .fold((t_rev, f64::INFINITY), |best, row| if row.1 < best.1 { row } else { best });
    Ok(EchoRecord {
        xi: proto.xi,
        forward: fwd.series.clone(),
        backward,
        fidelity,
        fidelity_at_reversal,
        minimum,
        max_deviation: max_deviation(&cur, &initial),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn plus_state() -> DensityState {
        let h = FRAC_1_SQRT_2;
        DensityState::pure(vec![Complex64::new(h, 0.0), Complex64::new(h, 0.0)]).unwrap()
    }

    #[test]
    fn perturb_identity_cases() {
        let s = plus_state();
        assert_eq!(perturb(&s, 0.0), s);
        let full = perturb(&s, 2.0 * PI);
        for (a, b) in full.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn two_level_fidelity_is_cos_squared() {
        let s = plus_state();
        let spec = harmonic_weights(&s);
        for &xi in &[0.0, 0.3, 1.1, 2.5, PI] {
            let direct = peres_fidelity(&perturb(&s, xi), &s).unwrap();
            let expected = (xi / 2.0).cos().powi(2);
            assert!((direct - expected).abs() < 1e-14);
            assert!((fidelity_closed_form(&spec, xi) - expected).abs() < 1e-14);
            assert_eq!(harmonic_weights(&perturb(&s, xi)), spec);
        }
    }

    #[test]
    fn orthogonal_states_have_zero_fidelity() {
        let a = DensityState::fock(3, 0).unwrap();
        let b = DensityState::fock(3, 2).unwrap();
        assert_eq!(peres_fidelity(&a, &b).unwrap(), 0.0);
        assert_eq!(peres_fidelity(&b, &b).unwrap(), 1.0);
    }

    #[test]
    fn isotropic_spectrum_is_rotation_invariant() {
        let spec = harmonic_weights(&DensityState::fock(5, 3).unwrap());
        for &xi in &[0.1, 1.0, 3.0] {
            assert_eq!(fidelity_closed_form(&spec, xi), 1.0);
            assert_eq!(fidelity_linear(&spec, xi), 1.0);
        }
    }

    #[test]
    fn critical_strength_values() {
        assert_eq!(critical_strength(2.0), 1.0);
        assert_eq!(critical_strength(8.0), 0.5);
        assert_eq!(critical_strength(0.0), f64::INFINITY);
        let spec = harmonic_weights(&plus_state());
        let xic = critical_strength(spec.m2());
        assert!(fidelity_linear(&spec, xic).abs() < 1e-15);
    }

    #[test]
    fn protocol_validation() {
        assert!(EchoProtocol::new(0, 0.1).is_err());
        let mut p = EchoProtocol::new(3, 0.1).unwrap();
        p.record_every = 0;
        assert!(p.validate().is_err());
    }
}
