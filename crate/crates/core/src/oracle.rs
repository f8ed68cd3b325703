//! Brute-force Wigner function on a polar grid, used to cross-check the
//! band-mass reduction in [`crate::harmonics`].
//!
//! `W(alpha)` is evaluated from the Fock-basis form
//! `W = 2/(pi hbar) sum rho_{nn'} (-1)^n <n'|D(2 beta)|n>`, `beta = alpha/sqrt(hbar)`,
//! with its own Laguerre evaluation. Harmonics come from an FFT over the
//! angle and Gauss–Legendre quadrature over the action.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonics::HarmonicSpectrum;
use crate::model::DensityState;

/// Largest Fock level the oracle accepts.
pub const MAX_SUPPORT_LEVEL: usize = 32;

/// `Tr rho^2 = PURITY_SCALE * hbar * int W^2 d^2alpha`.
///
/// Pinned numerically on the ground state (`W = e^{-2|alpha|^2/hbar} / (pi hbar/2)`,
/// `int W^2 = 1/(pi hbar)`) and checked on mixed states in the tests.
pub const PURITY_SCALE: f64 = PI;

const NYQUIST_TOL: f64 = 1e-8;
const SUPPORT_EPS: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Defaults to one panel per `hbar` of action, at least 60.
    pub radial_panels: Option<usize>,
    pub nodes_per_panel: usize,
    /// Defaults to `4 n_max + 4`; smaller values are raised to it.
    pub n_angles: Option<usize>,
    /// Defaults to `hbar (4 n_max + 16)`.
    pub action_cut: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { radial_panels: None, nodes_per_panel: 16, n_angles: None, action_cut: None }
    }
}

#[derive(Clone, Debug)]
pub struct PolarGrid {
    pub hbar: f64,
    /// Radial nodes `I_j`.
    pub actions: Vec<f64>,
    /// Quadrature weights for `int dI`.
    pub quad_weights: Vec<f64>,
    pub n_angles: usize,
    /// Row-major `J × U` values `W(I_j, theta_u)`, `theta_u = 2 pi u / U`.
    pub values: Vec<f64>,
    /// Largest imaginary residue seen while summing.
    pub max_imag: f64,
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let (pn, pn1) = if n == 1 { (z, 1.0) } else { (p1, p0) };
        let dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn ln_fact(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Evaluates `W` on a polar grid. Refuses states with support above level 32.
pub fn wigner_on_grid(state: &DensityState, hbar: f64, spec: &GridSpec) -> Result<PolarGrid> {
    let support = state.support_end(SUPPORT_EPS);
    if support > MAX_SUPPORT_LEVEL + 1 {
        return Err(Error::OracleDomain(format!(
            "state occupies level {} (> {MAX_SUPPORT_LEVEL})",
            support - 1
        )));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidParam("hbar must be positive".into()));
    }
    let s = support.max(1);
    let n_max = s - 1;
    let min_angles = 4 * n_max + 4;
    let u = spec.n_angles.unwrap_or(min_angles).max(min_angles);
    let i_cut = spec.action_cut.unwrap_or(hbar * (4.0 * n_max as f64 + 16.0));

    let mut rho = vec![Complex64::new(0.0, 0.0); s * s];
    for n in 0..s {
        for np in 0..s {
            rho[n * s + np] = state.density_element(n, np);
        }
    }
    let lnf: Vec<f64> = (0..s).map(ln_fact).collect();

    let (gx, gw) = gauss_legendre(spec.nodes_per_panel);
    let panels = spec
        .radial_panels
        .unwrap_or_else(|| ((i_cut / hbar).ceil() as usize).max(60));
    let h = i_cut / panels as f64;
    let mut actions = Vec::new();
    let mut quad_weights = Vec::new();
    for p in 0..panels {
        let a = p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            actions.push(a + 0.5 * h * (x + 1.0));
            quad_weights.push(0.5 * h * w);
        }
    }

    let prefactor = 2.0 / (PI * hbar);
    let mut values = vec![0.0; actions.len() * u];
    let mut max_imag = 0.0f64;
    let mut radial = vec![0.0; s * s];
    for (j, &action) in actions.iter().enumerate() {
        let g_abs = 2.0 * (action / hbar).sqrt();
        let x = g_abs * g_abs;
        // radial[n' * s + n] = |<n'|D(gamma)|n>| up to the angular phase
        for np in 0..s {
            for n in 0..s {
                let (lo, hi) = if np >= n { (n, np) } else { (np, n) };
                let d = hi - lo;
                let log_mag = 0.5 * (lnf[lo] - lnf[hi]) + d as f64 * g_abs.ln() - 0.5 * x;
                let lag = laguerre(lo, d as f64, x);
                let mag = if d == 0 { (-0.5 * x).exp() } else { log_mag.exp() };
                radial[np * s + n] = mag * lag;
            }
        }
        for ui in 0..u {
            let theta = 2.0 * PI * ui as f64 / u as f64;
            // gamma = |gamma| e^{-i theta}
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..s {
                let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
                for np in 0..s {
                    let r = rho[n * s + np];
                    if r.norm_sqr() == 0.0 {
                        continue;
                    }
                    let phase = if np >= n {
                        Complex64::from_polar(1.0, -((np - n) as f64) * theta)
                    } else {
                        let d = n - np;
                        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                        sign * Complex64::from_polar(1.0, d as f64 * theta)
                    };
                    acc += r * parity * radial[np * s + n] * phase;
                }
            }
            let w = prefactor * acc;
            max_imag = max_imag.max(w.im.abs());
            values[j * u + ui] = w.re;
        }
    }
    Ok(PolarGrid { hbar, actions, quad_weights, n_angles: u, values, max_imag })
}

impl PolarGrid {
    /// `int W d^2 alpha`, with `d^2 alpha = dI dtheta / 2`.
    pub fn normalization(&self) -> f64 {
        let u = self.n_angles;
        let dtheta = 2.0 * PI / u as f64;
        self.quad_weights
            .iter()
            .enumerate()
            .map(|(j, w)| 0.5 * w * dtheta * self.values[j * u..(j + 1) * u].iter().sum::<f64>())
            .sum()
    }

    /// `PURITY_SCALE * hbar * int W^2 d^2 alpha`.
    pub fn purity(&self) -> f64 {
        let u = self.n_angles;
        let dtheta = 2.0 * PI / u as f64;
        let int_w2: f64 = self
            .quad_weights
            .iter()
            .enumerate()
            .map(|(j, w)| 0.5 * w * dtheta * self.values[j * u..(j + 1) * u].iter().map(|v| v * v).sum::<f64>())
            .sum();
        PURITY_SCALE * self.hbar * int_w2
    }

    /// `W` at the node nearest to `(I, theta)`.
    pub fn value_at(&self, j: usize, u: usize) -> f64 {
        self.values[j * self.n_angles + u]
    }
}

/// Harmonic masses `int dI |W_m(I)|^2` from the grid, normalized.
pub fn harmonics_from_grid(grid: &PolarGrid) -> Result<HarmonicSpectrum> {
    let u = grid.n_angles;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(u);
    let mut masses = vec![0.0; u];
    let mut buf = vec![Complex64::new(0.0, 0.0); u];
    let scale = PI / u as f64;
    for (j, w) in grid.quad_weights.iter().enumerate() {
        for (b, v) in buf.iter_mut().zip(&grid.values[j * u..(j + 1) * u]) {
            *b = Complex64::new(*v, 0.0);
        }
        fft.process(&mut buf);
        for (mass, b) in masses.iter_mut().zip(&buf) {
            *mass += w * (scale * b).norm_sqr();
        }
    }
    let total: f64 = masses.iter().sum();
    // FFT bin index k maps to harmonic m = k (k <= U/2) or k - U
    let top_start = u / 2 - u / 8;
    let top: f64 = (0..u)
        .filter(|&k| {
            let m = if k <= u / 2 { k } else { u - k };
            m >= top_start
        })
        .map(|k| masses[k])
        .sum();
    if top > NYQUIST_TOL * total {
        return Err(Error::OracleDomain(format!(
            "top harmonics carry {:.3e} of the mass; grid too coarse",
            top / total
        )));
    }
    let half = u / 2;
    let one_sided: Vec<f64> = (0..=half)
        .map(|m| if m == 0 { masses[0] } else { 0.5 * (masses[m] + masses[(u - m) % u]) })
        .collect();
    Ok(HarmonicSpectrum::from_one_sided(&one_sided, None))
}

/// `<m^2>` from the grid.
pub fn m2_from_grid(grid: &PolarGrid) -> Result<f64> {
    Ok(harmonics_from_grid(grid)?.m2())
}
