//! Monte Carlo ensembles for the classical kicked quartic oscillator.
//!
//! With `alpha = sqrt(I) e^{-i theta}` and `H_c = omega0 |alpha|^2 + |alpha|^4`,
//! one period of free motion rotates `alpha -> alpha e^{-i (omega0 + 2|alpha|^2)}`
//! and the delta kick shifts `alpha -> alpha + i g0`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::HarmonicSpectrum;
use crate::linalg::CompensatedSum;
use crate::model::{ModelParams, Seed};

/// Trajectories per RNG stream.
const CHUNK: usize = 4096;

/// Tail mass (upper half of the harmonic range) that flags `m_max` as too small.
pub const TAIL_FLAG_MASS: f64 = 0.01;

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_M_MAX: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalEnsemble {
    pub points: Vec<Complex64>,
    pub seed: Seed,
    /// Periods elapsed (negative after net backward evolution).
    pub t: i64,
}

impl ClassicalEnsemble {
    pub fn n_traj(&self) -> usize {
        self.points.len()
    }
}

/// Isotropic complex Gaussian with `<|alpha|^2> = delta`.
///
/// Trajectory `j` is drawn from stream `j / 4096` of a ChaCha8 generator
/// seeded with `seed`, so results do not depend on scheduling.
pub fn sample_initial(delta: f64, n_traj: usize, seed: Seed) -> Result<ClassicalEnsemble> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParam(format!("delta must be positive, got {delta}")));
    }
    let sigma = (delta / 2.0).sqrt();
    let n_chunks = n_traj.div_ceil(CHUNK);
    let chunks: Vec<Vec<Complex64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n_traj - c * CHUNK);
            (0..len)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(sigma * re, sigma * im)
                })
                .collect()
        })
        .collect();
    Ok(ClassicalEnsemble { points: chunks.concat(), seed, t: 0 })
}

fn forward_point(a: Complex64, omega0: f64, kick: Complex64) -> Complex64 {
    let rotated = a * Complex64::from_polar(1.0, -(omega0 + 2.0 * a.norm_sqr()));
    rotated + kick
}

fn backward_point(a: Complex64, omega0: f64, kick: Complex64) -> Complex64 {
    let unkicked = a - kick;
    unkicked * Complex64::from_polar(1.0, omega0 + 2.0 * unkicked.norm_sqr())
}

/// One period: nonlinear rotation, then kick.
pub fn classical_step(ens: &ClassicalEnsemble, params: &ModelParams) -> ClassicalEnsemble {
    let kick = Complex64::new(0.0, params.g0);
    let points = ens
        .points
        .par_iter()
        .map(|&a| forward_point(a, params.omega0, kick))
        .collect();
    ClassicalEnsemble { points, seed: ens.seed, t: ens.t + 1 }
}

/// Exact inverse of [`classical_step`]: un-kick, then un-rotate with the
/// pre-kick action.
pub fn classical_step_inverse(ens: &ClassicalEnsemble, params: &ModelParams) -> ClassicalEnsemble {
    let kick = Complex64::new(0.0, params.g0);
    let points = ens
        .points
        .par_iter()
        .map(|&a| backward_point(a, params.omega0, kick))
        .collect();
    ClassicalEnsemble { points, seed: ens.seed, t: ens.t - 1 }
}

/// Classical analog of `exp(-i xi n)`: `alpha -> alpha e^{-i xi}`.
pub fn classical_perturb(ens: &ClassicalEnsemble, xi: f64) -> ClassicalEnsemble {
    let r = Complex64::from_polar(1.0, -xi);
    ClassicalEnsemble { points: ens.points.iter().map(|a| a * r).collect(), ..ens.clone() }
}

pub fn mean_action(ens: &ClassicalEnsemble) -> f64 {
    let s: CompensatedSum = ens.points.iter().map(|a| a.norm_sqr()).collect();
    s.value() / ens.n_traj() as f64
}

/// `(t, <I>)` for each ensemble in the stream.
pub fn mean_action_series<'a, I>(stream: I) -> Vec<(i64, f64)>
where
    I: IntoIterator<Item = &'a ClassicalEnsemble>,
{
    stream.into_iter().map(|e| (e.t, mean_action(e))).collect()
}

/// Trajectories carried with their tangent maps.
///
/// Liouville's theorem gives `rho_t = rho_0 o M^{-t}` for the area-preserving
/// map `M`, so `d rho_t / d theta` at `x = M^t(y)` is `grad rho_0(y) . J^{-1} v(x)`
/// with `J = DM^t(y)` and `v(x) = -i x` the rotation generator. For the
/// Gaussian `rho_0 ~ exp(-|y|^2/delta)` this yields `<m^2>` without any density
/// estimate; see [`TangentEnsemble::m2`].
#[derive(Clone, Debug)]
pub struct TangentEnsemble {
    pub ensemble: ClassicalEnsemble,
    initial: Vec<Complex64>,
    /// Row-major real 2x2 `DM^t` in `(Re alpha, Im alpha)` per trajectory.
    jacobians: Vec<[f64; 4]>,
    delta: f64,
}

/// Self-normalized Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiouvilleM2 {
    pub m2: f64,
    pub sigma: f64,
}

impl TangentEnsemble {
    /// `ens` must be a `t = 0` sample of width `delta` from [`sample_initial`].
    pub fn new(ens: ClassicalEnsemble, delta: f64) -> Result<Self> {
        if ens.t != 0 || !(delta > 0.0) {
            return Err(Error::InvalidParam("tangent ensemble needs a t = 0 sample and delta > 0".into()));
        }
        let n = ens.n_traj();
        Ok(TangentEnsemble { initial: ens.points.clone(), ensemble: ens, jacobians: vec![[1.0, 0.0, 0.0, 1.0]; n], delta })
    }

    /// One forward period for points and tangent maps.
    pub fn step(&self, params: &ModelParams) -> Self {
        let kick = Complex64::new(0.0, params.g0);
        let omega0 = params.omega0;
        let (points, jacobians): (Vec<Complex64>, Vec<[f64; 4]>) = self
            .ensemble
            .points
            .par_iter()
            .zip(&self.jacobians)
            .map(|(&a, j)| {
                // d alpha' = e^{-i phi} (d alpha - 4 i alpha Re(conj(alpha) d alpha))
                let rot = Complex64::from_polar(1.0, -(omega0 + 2.0 * a.norm_sqr()));
                let image = |u: Complex64| rot * (u - Complex64::new(0.0, 4.0) * a * (a.re * u.re + a.im * u.im));
                let c0 = image(Complex64::new(1.0, 0.0));
                let c1 = image(Complex64::new(0.0, 1.0));
                let d = [c0.re, c1.re, c0.im, c1.im];
                let next = [
                    d[0] * j[0] + d[1] * j[2],
                    d[0] * j[1] + d[1] * j[3],
                    d[2] * j[0] + d[3] * j[2],
                    d[2] * j[1] + d[3] * j[3],
                ];
                (a * rot + kick, next)
            })
            .unzip();
        TangentEnsemble {
            ensemble: ClassicalEnsemble { points, seed: self.ensemble.seed, t: self.ensemble.t + 1 },
            initial: self.initial.clone(),
            jacobians,
            delta: self.delta,
        }
    }

    /// `<m^2> = E[rho_0(y) (2/delta)^2 (y . J^{-1} v)^2] / E[rho_0(y)]` over
    /// the initial points `y`, which are themselves drawn from `rho_0`.
    pub fn m2(&self) -> LiouvilleM2 {
        let scale = (2.0 / self.delta).powi(2);
        let terms: Vec<(f64, f64)> = self
            .initial
            .par_iter()
            .zip(&self.ensemble.points)
            .zip(&self.jacobians)
            .map(|((y, x), j)| {
                let v = Complex64::new(x.im, -x.re);
                // J has unit determinant, so its inverse is the adjugate
                let w = Complex64::new(j[3] * v.re - j[1] * v.im, -j[2] * v.re + j[0] * v.im);
                let proj = y.re * w.re + y.im * w.im;
                ((-y.norm_sqr() / self.delta).exp(), scale * proj * proj)
            })
            .collect();
        let wsum: CompensatedSum = terms.iter().map(|t| t.0).collect();
        let wsum = wsum.value();
        let num: CompensatedSum = terms.iter().map(|t| t.0 * t.1).collect();
        let m2 = num.value() / wsum;
        let var: CompensatedSum = terms.iter().map(|t| (t.0 * (t.1 - m2)).powi(2)).collect();
        LiouvilleM2 { m2, sigma: var.value().sqrt() / wsum }
    }
}

/// Harmonic estimate of the classical distribution.
#[derive(Clone, Debug)]
pub struct ClassicalHarmonics {
    /// Bias-subtracted, clamped, normalized weights.
    pub spectrum: HarmonicSpectrum,
    /// `<m^2>` from the bias-subtracted weights without clamping.
    pub m2_unclamped: f64,
    /// Shot-noise standard deviation of `m2_unclamped` for an isotropic ensemble.
    pub m2_sigma: f64,
    /// Unclamped mass in `m_max/2 < |m| <= m_max`.
    pub tail_mass: f64,
    pub flagged: bool,
    pub m_max: usize,
}

impl ClassicalHarmonics {
    pub fn m2(&self) -> f64 {
        self.spectrum.m2()
    }
}

/// Estimates `P_m`, the normalized `int dI |W_m(I)|^2`, from an ensemble.
///
/// Trajectories are split into `n_bins` equal-population action bins. In
/// bin `k` with `N_k` points and width `dI_k`, the angular coefficients
/// `c_m = (1/N_k) sum_j e^{i m theta_j}` give the unbiased estimate
/// `(N_k |c_m|^2 - 1)/(N_k - 1)` of `|c_m|^2`. Since `W_m(I) = rho_I(I) c_m(I)`
/// with `rho_I ~ (N_k/N)/dI_k`, bins are weighted by `(N_k/N)^2 / dI_k`.
pub fn classical_m2(ens: &ClassicalEnsemble, n_bins: usize, m_max: usize) -> Result<ClassicalHarmonics> {
    let n = ens.n_traj();
    if n_bins == 0 || m_max == 0 {
        return Err(Error::InvalidParam("n_bins and m_max must be positive".into()));
    }
    if n < 2 * n_bins {
        return Err(Error::InvalidParam(format!("{n} trajectories for {n_bins} bins")));
    }
    let mut order: Vec<(f64, Complex64)> = ens
        .points
        .iter()
        .map(|a| {
            let r = a.norm();
            // e^{i theta} with alpha = sqrt(I) e^{-i theta}
            let unit = if r > 0.0 { a.conj() / r } else { Complex64::new(1.0, 0.0) };
            (a.norm_sqr(), unit)
        })
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));

    let bounds: Vec<(usize, usize)> = (0..n_bins)
        .map(|k| (k * n / n_bins, (k + 1) * n / n_bins))
        .collect();
    struct Bin {
        weight: f64,
        count: f64,
        est: Vec<f64>,
    }
    let bins: Vec<Bin> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let pts = &order[lo..hi];
            let count = pts.len() as f64;
            let width = (pts[pts.len() - 1].0 - pts[0].0).max(f64::MIN_POSITIVE);
            let frac = count / n as f64;
            let mut sums = vec![Complex64::new(0.0, 0.0); m_max + 1];
            for &(_, z) in pts {
                let mut zm = Complex64::new(1.0, 0.0);
                for s in sums.iter_mut() {
                    *s += zm;
                    zm *= z;
                }
            }
            let est = sums
                .iter()
                .enumerate()
                .map(|(m, s)| {
                    if m == 0 {
                        1.0
                    } else {
                        (s.norm_sqr() / count - 1.0) / (count - 1.0)
                    }
                })
                .collect();
            Bin { weight: frac * frac / width, count, est }
        })
        .collect();

    let wsum: f64 = bins.iter().map(|b| b.weight).sum();
    let raw: Vec<f64> = (0..=m_max)
        .map(|m| bins.iter().map(|b| b.weight * b.est[m]).sum::<f64>() / wsum)
        .collect();
    let sigma: Vec<f64> = (0..=m_max)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                bins.iter()
                    .map(|b| (b.weight / (b.count - 1.0)).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / wsum
            }
        })
        .collect();

    let raw_total: f64 = 1.0 + 2.0 * raw[1..].iter().sum::<f64>();
    let m2_unclamped = raw
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, r)| 2.0 * (m * m) as f64 * r)
        .collect::<CompensatedSum>()
        .value()
        / raw_total;
    let m2_sigma = sigma
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, s)| (2.0 * (m * m) as f64 * s).powi(2))
        .sum::<f64>()
        .sqrt()
        / raw_total;
    let tail_mass = 2.0 * raw[m_max / 2 + 1..].iter().sum::<f64>() / raw_total;
    let clamped: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
    Ok(ClassicalHarmonics {
        spectrum: HarmonicSpectrum::from_one_sided(&clamped, None),
        m2_unclamped,
        m2_sigma,
        tail_mass,
        flagged: tail_mass > TAIL_FLAG_MASS,
        m_max,
    })
}

/// [`classical_m2`] with `m_max` doubled from `m_start` while the tail flag
/// is raised, up to `m_cap`.
pub fn classical_m2_adaptive(
    ens: &ClassicalEnsemble,
    n_bins: usize,
    m_start: usize,
    m_cap: usize,
) -> Result<ClassicalHarmonics> {
    let mut m_max = m_start.max(1);
    loop {
        let est = classical_m2(ens, n_bins, m_max)?;
        if !est.flagged || m_max >= m_cap {
            return Ok(est);
        }
        m_max = (2 * m_max).min(m_cap);
    }
}

/// Phase-space overlap `sum h_a h_b / sum h_b^2` on a `grid × grid`
/// histogram over the joint bounding box; `b` is the reference.
pub fn classical_fidelity(a: &ClassicalEnsemble, b: &ClassicalEnsemble, grid: usize) -> f64 {
    let all = a.points.iter().chain(&b.points);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in all {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let wx = (x1 - x0).max(1e-300);
    let wy = (y1 - y0).max(1e-300);
    let hist = |e: &ClassicalEnsemble| {
        let mut h = vec![0.0f64; grid * grid];
        for p in &e.points {
            let i = (((p.re - x0) / wx * grid as f64) as usize).min(grid - 1);
            let j = (((p.im - y0) / wy * grid as f64) as usize).min(grid - 1);
            h[i * grid + j] += 1.0;
        }
        h
    };
    let ha = hist(a);
    let hb = hist(b);
    let num: f64 = ha.iter().zip(&hb).map(|(x, y)| x * y).sum();
    let den: f64 = hb.iter().map(|y| y * y).sum();
    let scale = b.n_traj() as f64 / a.n_traj() as f64;
    num * scale / den
}
