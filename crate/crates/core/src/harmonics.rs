//! Harmonic weights of the Wigner function and the complexity measure
//! `<m^2>`.
//!
//! By orthogonality of the Laguerre radial functions, the `L^2` mass of the
//! `m`-th angular harmonic, `int dI |W_m(I)|^2`, equals `sum_n |rho_{n,n+m}|^2`
//! up to an `m`-independent constant, so the normalized weights follow from
//! the density-matrix bands alone. The wigner oracle checks this reduction.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::linalg::{cross_gram, gemm_into, CompensatedSum, MatView};
use crate::model::DensityState;

/// Band masses beyond the stored range sum to at most this.
pub const TRUNCATION_MASS: f64 = 1e-14;

/// Amplitudes below this are treated as outside the support.
const SUPPORT_EPS: f64 = 1e-17;

const TILE_ROWS: usize = 256;

/// Normalized harmonic weights `P_m` (stored for `m >= 0`; `P_{-m} = P_m`).
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicSpectrum {
    weights: Vec<f64>,
    m2: f64,
    tail_mass: f64,
    norm: f64,
}

impl HarmonicSpectrum {
    /// Builds a spectrum from unnormalized one-sided masses `b[m]`, `m >= 0`.
    /// `norm` is recorded as-is (the purity, for quantum states).
    pub fn from_one_sided(bands: &[f64], norm_hint: Option<f64>) -> Self {
        let total: f64 = bands
            .iter()
            .enumerate()
            .map(|(m, &b)| if m == 0 { b } else { 2.0 * b })
            .collect::<CompensatedSum>()
            .value();
        let p: Vec<f64> = if total > 0.0 {
            bands.iter().map(|b| b / total).collect()
        } else {
            let mut p = vec![0.0; bands.len().max(1)];
            p[0] = 1.0;
            p
        };
        // certified cut: drop the longest suffix whose two-sided mass is tiny
        let mut cut = p.len();
        let mut tail = 0.0;
        while cut > 1 {
            let next = tail + 2.0 * p[cut - 1];
            if next > TRUNCATION_MASS {
                break;
            }
            tail = next;
            cut -= 1;
        }
        let weights = p[..cut].to_vec();
        let m2 = weights
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &w)| 2.0 * (m * m) as f64 * w)
            .collect::<CompensatedSum>()
            .value();
        HarmonicSpectrum { weights, m2, tail_mass: tail, norm: norm_hint.unwrap_or(total) }
    }

    /// `P_m` for any integer `m`.
    pub fn weight(&self, m: i64) -> f64 {
        self.weights.get(m.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// Largest stored `|m|`.
    pub fn max_harmonic(&self) -> usize {
        self.weights.len() - 1
    }

    /// One-sided weights, index `m >= 0`.
    pub fn one_sided(&self) -> &[f64] {
        &self.weights
    }

    /// `(m, P_m)` for `m` in `-M..=M`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let m = self.max_harmonic() as i64;
        (-m..=m).map(move |k| (k, self.weight(k)))
    }

    /// `<m^2> = sum_m m^2 P_m`.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// `sqrt(<m^2>)`, the estimated number of harmonics.
    pub fn rms(&self) -> f64 {
        self.m2.sqrt()
    }

    /// `sum_m |m|^k P_m`.
    pub fn moment(&self, k: i32) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &w)| 2.0 * (m as f64).powi(k) * w)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Upper bound on the mass outside the stored range.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Normalization of the raw band masses; `Tr rho^2` for quantum states.
    pub fn norm(&self) -> f64 {
        self.norm
    }
}

/// `b[m] = sum_n |rho_{n,n+m}|^2` for `m = 0..dim`.
///
/// Density-matrix rows are materialized in tiles of the upper triangle as
/// `A_rows · Aᴴ` with `A = [sqrt(p_k) psi_k]`, never as a full matrix.
pub fn band_masses(state: &DensityState) -> Vec<f64> {
    let n = state.dim();
    let k = state.n_members();
    let support = state.support_end(SUPPORT_EPS);
    let mut bands = vec![0.0; n];
    if support == 0 {
        return bands;
    }
    let a = state.scaled_amplitudes();
    let tiles: Vec<usize> = (0..support).step_by(TILE_ROWS).collect();
    let partials: Vec<Vec<f64>> = tiles
        .par_iter()
        .map(|&r0| {
            let r1 = (r0 + TILE_ROWS).min(support);
            let rows = r1 - r0;
            let cols = support - r0;
            let mut tile = vec![num_complex::Complex64::new(0.0, 0.0); rows * cols];
            let lhs = MatView::col_major(&a, n, r0, 0, rows, k);
            let rhs = MatView::col_major(&a, n, r0, 0, cols, k).adjoint();
            gemm_into(lhs, rhs, &mut tile, 0, rows);
            let mut part = vec![0.0; cols];
            for j in 0..cols {
                let col = &tile[j * rows..(j + 1) * rows];
                for (i, z) in col.iter().enumerate().take((j + 1).min(rows)) {
                    part[j - i] += z.norm_sqr();
                }
            }
            part
        })
        .collect();
    for part in partials {
        for (b, p) in bands.iter_mut().zip(part) {
            *b += p;
        }
    }
    bands
}

/// Harmonic spectrum of the Wigner function of `state`.
pub fn harmonic_weights(state: &DensityState) -> HarmonicSpectrum {
    HarmonicSpectrum::from_one_sided(&band_masses(state), None)
}

/// `<m^2>` without forming the spectrum, as `||[n, rho]||^2 / Tr rho^2`.
///
/// With `S = [sqrt(p_k) psi_k]` and `Y = (n - c) S` for the mean occupation
/// `c`, the commutator norm is `2 Re tr(YᴴY (SᴴS)ᴴ) - 2 ||SᴴY||^2`, which
/// only needs `K × K` Gram matrices. Centering keeps the cancellation at the
/// scale of the occupation variance. Agrees with the spectrum up to round-off
/// and the spectrum's truncation cut.
pub fn m2_direct(state: &DensityState) -> f64 {
    let n = state.dim();
    let k = state.n_members();
    let support = state.support_end(SUPPORT_EPS);
    if support == 0 {
        return 0.0;
    }
    let full = state.scaled_amplitudes();
    let mut s = Vec::with_capacity(support * k);
    for v in full.chunks_exact(n) {
        s.extend_from_slice(&v[..support]);
    }
    let pops = state.populations();
    let total: f64 = pops.iter().sum();
    let c = pops.iter().enumerate().map(|(i, p)| i as f64 * p).sum::<f64>() / total;
    let mut y = s.clone();
    for v in y.chunks_exact_mut(support) {
        for (i, a) in v.iter_mut().enumerate() {
            *a *= i as f64 - c;
        }
    }
    let g1 = cross_gram(&s, k, &s, k, support);
    let gx = cross_gram(&s, k, &y, k, support);
    let gxx = cross_gram(&y, k, &y, k, support);
    let mut comm = CompensatedSum::default();
    let mut pur = CompensatedSum::default();
    for ((a, b), x) in gxx.iter().zip(&g1).zip(&gx) {
        comm.add(2.0 * (a * b.conj()).re);
        comm.add(-2.0 * x.norm_sqr());
        pur.add(b.norm_sqr());
    }
    (comm.value() / pur.value()).max(0.0)
}

/// Reduces a time-ordered stream of states to `(t, <m^2>)` rows.
pub fn m2_series<'a, I>(states: I) -> Vec<(usize, f64)>
where
    I: IntoIterator<Item = (usize, &'a DensityState)>,
{
    states
        .into_iter()
        .map(|(t, s)| (t, harmonic_weights(s).m2()))
        .collect()
}

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `t,m,P_m` rows for `-M..=M`.
pub fn write_spectrum_rows<W: Write>(w: &mut W, t: usize, spec: &HarmonicSpectrum) -> io::Result<()> {
    for (m, p) in spec.iter() {
        writeln!(w, "{t},{m},{}", fmt_f64(p))?;
    }
    Ok(())
}

/// Writes `t,m2` rows.
pub fn write_summary_rows<W: Write>(w: &mut W, series: &[(usize, f64)]) -> io::Result<()> {
    for (t, m2) in series {
        writeln!(w, "{t},{}", fmt_f64(*m2))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ground_state_has_only_zero_harmonic() {
        let s = DensityState::fock(10, 0).unwrap();
        let spec = harmonic_weights(&s);
        assert_eq!(spec.weight(0), 1.0);
        assert_eq!(spec.m2(), 0.0);
        assert_eq!(spec.max_harmonic(), 0);
    }

    #[test]
    fn superposition_of_two_levels() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = DensityState::pure(vec![c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]).unwrap();
        let spec = harmonic_weights(&s);
        assert!((spec.weight(0) - 0.5).abs() < 1e-15);
        assert!((spec.weight(1) - 0.25).abs() < 1e-15);
        assert!((spec.weight(-1) - 0.25).abs() < 1e-15);
        assert!((spec.m2() - 0.5).abs() < 1e-15);
        assert!((spec.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn band_tiles_match_dense_density_matrix() {
        // more rows than one tile, several members
        let n = 600;
        let k = 3;
        let mut vecs = Vec::new();
        for j in 0..k {
            let v: Vec<_> = (0..n)
                .map(|i| c(((i * (j + 2)) as f64 * 0.37).sin(), ((i + j) as f64 * 0.11).cos()) * (-(i as f64) / 150.0).exp())
                .collect();
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            vecs.push(v.into_iter().map(|a| a / norm).collect());
        }
        let s = DensityState::new(n, vec![0.5, 0.3, 0.2], vecs).unwrap();
        let bands = band_masses(&s);
        for &m in &[0usize, 1, 7, 255, 256, 257, 400] {
            let direct: f64 = (0..n - m).map(|i| s.density_element(i, i + m).norm_sqr()).sum();
            assert!((bands[m] - direct).abs() < 1e-13 * direct.max(1e-300), "m={m}");
        }
    }

    #[test]
    fn direct_m2_matches_spectrum() {
        let n = 300;
        let mut vecs = Vec::new();
        for j in 0..4 {
            let v: Vec<_> = (0..n)
                .map(|i| c(((i * (j + 3)) as f64 * 0.21).cos(), ((i * j) as f64 * 0.05).sin()) * (-(i as f64) / 60.0).exp())
                .collect();
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            vecs.push(v.into_iter().map(|a| a / norm).collect());
        }
        let s = DensityState::new(n, vec![0.4, 0.3, 0.2, 0.1], vecs).unwrap();
        let spec = harmonic_weights(&s).m2();
        let direct = m2_direct(&s);
        assert!((spec - direct).abs() < 1e-11 * spec, "{spec} vs {direct}");
        assert_eq!(m2_direct(&DensityState::fock(8, 3).unwrap()), 0.0);
    }

    #[test]
    fn weights_normalize_and_m2_matches_stored() {
        let s = DensityState::pure(vec![c(0.6, 0.0), c(0.0, 0.48), c(0.64, 0.0)]).unwrap();
        let spec = harmonic_weights(&s);
        let total: f64 = spec.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let m2: f64 = spec.iter().map(|(m, p)| (m * m) as f64 * p).sum();
        assert!((m2 - spec.m2()).abs() < 1e-15);
        assert_eq!(spec.weight(5), 0.0);
    }
}
