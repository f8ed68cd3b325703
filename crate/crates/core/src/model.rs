//! Model parameters, mixed-state representation and initial states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Fraction of the basis (from the top) whose population counts as tail.
pub const TAIL_FRACTION: f64 = 0.05;

/// Default cumulative-weight cutoff for thermal mixtures.
pub const DEFAULT_WEIGHT_CUTOFF: f64 = 1e-10;

const NORM_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Fock-space truncation and the tail guard applied after every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub dim: usize,
    pub tail_tol: f64,
}

impl TruncationPolicy {
    pub fn new(dim: usize, tail_tol: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParam(format!("truncation dim must be >= 2, got {dim}")));
        }
        if !(tail_tol > 0.0) {
            return Err(Error::InvalidParam(format!("tail_tol must be positive, got {tail_tol}")));
        }
        Ok(TruncationPolicy { dim, tail_tol })
    }

    /// First basis index belonging to the guarded tail.
    pub fn tail_start(&self) -> usize {
        tail_start(self.dim)
    }
}

pub(crate) fn tail_start(dim: usize) -> usize {
    let k = ((dim as f64) * TAIL_FRACTION).ceil() as usize;
    dim - k.max(1)
}

/// Physical and numerical parameters of the kicked quartic oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega0: f64,
    pub hbar: f64,
    pub g0: f64,
    /// Kick period; fixed to one.
    pub period: f64,
    pub trunc: TruncationPolicy,
}

impl ModelParams {
    pub fn new(omega0: f64, hbar: f64, g0: f64, trunc: TruncationPolicy) -> Result<Self> {
        let p = ModelParams { omega0, hbar, g0, period: 1.0, trunc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::InvalidParam(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.g0 >= 0.0) || !self.g0.is_finite() {
            return Err(Error::InvalidParam(format!("g0 must be >= 0, got {}", self.g0)));
        }
        if !self.omega0.is_finite() {
            return Err(Error::InvalidParam("omega0 must be finite".into()));
        }
        if self.period != 1.0 {
            return Err(Error::InvalidParam(format!("kick period is fixed to 1, got {}", self.period)));
        }
        TruncationPolicy::new(self.trunc.dim, self.trunc.tail_tol)?;
        Ok(())
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.trunc.dim = dim;
        self
    }

    pub fn with_g0(mut self, g0: f64) -> Self {
        self.g0 = g0;
        self
    }
}

/// RNG seed, recorded in every manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

/// Width of the isotropic coherent-state mixture. `delta_small` is the
/// total Gaussian width `delta_cap + hbar/2` of the resulting Wigner function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub delta_cap: f64,
    pub delta_small: f64,
    /// Thermal members are included until the cumulative weight reaches
    /// `1 - weight_cutoff`; the remainder is reported as discarded.
    pub weight_cutoff: f64,
}

impl InitialSpec {
    pub fn from_delta_cap(delta_cap: f64, hbar: f64) -> Result<Self> {
        if !(delta_cap >= 0.0) || !delta_cap.is_finite() {
            return Err(Error::InvalidParam(format!("Delta must be >= 0, got {delta_cap}")));
        }
        Ok(InitialSpec {
            delta_cap,
            delta_small: delta_cap + hbar / 2.0,
            weight_cutoff: DEFAULT_WEIGHT_CUTOFF,
        })
    }

    /// Builds from the total width; requires `delta_small >= hbar/2`.
    pub fn from_delta_small(delta_small: f64, hbar: f64) -> Result<Self> {
        let mut delta_cap = delta_small - hbar / 2.0;
        if delta_cap < 0.0 {
            if delta_cap > -1e-12 * hbar.max(delta_small) {
                delta_cap = 0.0;
            } else {
                return Err(Error::InvalidParam(format!(
                    "delta = {delta_small} is below the minimal cell hbar/2 = {}",
                    hbar / 2.0
                )));
            }
        }
        Self::from_delta_cap(delta_cap, hbar)
    }

    pub fn with_weight_cutoff(mut self, cutoff: f64) -> Self {
        self.weight_cutoff = cutoff;
        self
    }
}

/// Mixed state stored as a weighted ensemble of normalized Fock-basis vectors.
///
/// Amplitudes are kept member-major in one flat buffer, i.e. a column-major
/// `dim × n_members` matrix whose columns are the member vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    dim: usize,
    weights: Vec<f64>,
    amps: Vec<Complex64>,
    discarded_weight: f64,
}

impl DensityState {
    pub fn new(dim: usize, weights: Vec<f64>, vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        if weights.len() != vectors.len() {
            return Err(Error::InvalidState(format!(
                "{} weights for {} vectors",
                weights.len(),
                vectors.len()
            )));
        }
        let mut amps = Vec::with_capacity(dim * vectors.len());
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimMismatch { expected: dim, got: v.len() });
            }
            amps.extend_from_slice(v);
        }
        Self::from_flat(dim, weights, amps)
    }

    pub fn from_flat(dim: usize, weights: Vec<f64>, amps: Vec<Complex64>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidState("dim must be positive".into()));
        }
        if weights.is_empty() {
            return Err(Error::InvalidState("state has no members".into()));
        }
        if amps.len() != dim * weights.len() {
            return Err(Error::InvalidState("amplitude buffer length mismatch".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidState("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        for (k, v) in amps.chunks_exact(dim).enumerate() {
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>();
            if (norm.sqrt() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidState(format!("member {k} has norm {}", norm.sqrt())));
            }
        }
        Ok(DensityState { dim, weights, amps, discarded_weight: 0.0 })
    }

    pub fn pure(vector: Vec<Complex64>) -> Result<Self> {
        let dim = vector.len();
        Self::from_flat(dim, vec![1.0], vector)
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidState(format!("Fock level {n} outside dim {dim}")));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[n] = Complex64::new(1.0, 0.0);
        Self::pure(v)
    }

    /// Same weights, new amplitudes. Used by unitary maps.
    pub(crate) fn with_amplitudes(&self, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        DensityState {
            dim: self.dim,
            weights: self.weights.clone(),
            amps,
            discarded_weight: self.discarded_weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_members(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn member(&self, k: usize) -> &[Complex64] {
        &self.amps[k * self.dim..(k + 1) * self.dim]
    }

    pub fn members(&self) -> impl Iterator<Item = (f64, &[Complex64])> {
        self.weights.iter().copied().zip(self.amps.chunks_exact(self.dim))
    }

    /// Weight dropped when the state was built (thermal cutoff).
    pub fn discarded_weight(&self) -> f64 {
        self.discarded_weight
    }

    /// Applies `f` to every member vector.
    pub fn map_members(&self, mut f: impl FnMut(&mut [Complex64])) -> Self {
        let mut amps = self.amps.clone();
        for v in amps.chunks_exact_mut(self.dim) {
            f(v);
        }
        self.with_amplitudes(amps)
    }

    /// Populations `rho_nn`.
    pub fn populations(&self) -> Vec<f64> {
        let mut pop = vec![0.0; self.dim];
        for (p, v) in self.members() {
            for (acc, a) in pop.iter_mut().zip(v) {
                *acc += p * a.norm_sqr();
            }
        }
        pop
    }

    /// Population in the top `TAIL_FRACTION` of the basis.
    pub fn tail_mass(&self) -> f64 {
        let start = tail_start(self.dim);
        self.members()
            .map(|(p, v)| p * v[start..].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// One past the highest level with any member amplitude above `eps`.
    pub fn support_end(&self, eps: f64) -> usize {
        let eps2 = eps * eps;
        self.amps
            .chunks_exact(self.dim)
            .map(|v| v.iter().rposition(|a| a.norm_sqr() > eps2).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn density_element(&self, n: usize, np: usize) -> Complex64 {
        self.members().map(|(p, v)| p * v[n] * v[np].conj()).sum()
    }

    /// Dense row-major density matrix. Intended for small dims.
    pub fn density_matrix(&self) -> Vec<Complex64> {
        let n = self.dim;
        let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
        for (p, v) in self.members() {
            for i in 0..n {
                if v[i].norm_sqr() == 0.0 {
                    continue;
                }
                let vi = p * v[i];
                for j in 0..n {
                    rho[i * n + j] += vi * v[j].conj();
                }
            }
        }
        rho
    }

    /// Re-embeds the state in a basis of size `new_dim`. Shrinking requires
    /// the dropped levels to be empty to within `1e-14` per member.
    pub fn resized(&self, new_dim: usize) -> Result<Self> {
        let mut amps = Vec::with_capacity(new_dim * self.n_members());
        for v in self.amps.chunks_exact(self.dim) {
            if new_dim >= self.dim {
                amps.extend_from_slice(v);
                amps.resize(amps.len() + new_dim - self.dim, Complex64::new(0.0, 0.0));
            } else {
                let lost: f64 = v[new_dim..].iter().map(|a| a.norm_sqr()).sum();
                if lost > 1e-14 {
                    return Err(Error::InvalidState(format!(
                        "cannot shrink to {new_dim}: member mass {lost:e} above cut"
                    )));
                }
                amps.extend_from_slice(&v[..new_dim]);
            }
        }
        Ok(DensityState {
            dim: new_dim,
            weights: self.weights.clone(),
            amps,
            discarded_weight: self.discarded_weight,
        })
    }

    /// Drops levels `new_dim..`, returning the weighted population removed.
    pub fn truncated(&self, new_dim: usize) -> (Self, f64) {
        let new_dim = new_dim.min(self.dim);
        let mut amps = Vec::with_capacity(new_dim * self.n_members());
        let mut lost = 0.0;
        for (v, &p) in self.amps.chunks_exact(self.dim).zip(&self.weights) {
            lost += p * v[new_dim..].iter().map(|a| a.norm_sqr()).sum::<f64>();
            amps.extend_from_slice(&v[..new_dim]);
        }
        let state = DensityState {
            dim: new_dim,
            weights: self.weights.clone(),
            amps,
            discarded_weight: self.discarded_weight,
        };
        (state, lost)
    }

    /// Amplitudes scaled by `sqrt(p_k)`, so that `rho = A Aᴴ`.
    pub(crate) fn scaled_amplitudes(&self) -> Vec<Complex64> {
        let mut a = self.amps.clone();
        for (v, &p) in a.chunks_exact_mut(self.dim).zip(&self.weights) {
            let s = p.sqrt();
            v.iter_mut().for_each(|x| *x *= s);
        }
        a
    }
}

/// Thermal (geometric) Fock weights of mean occupation `nbar`, truncated
/// once the cumulative weight reaches `1 - cutoff`. Returns the kept weights
/// (renormalized) and the discarded mass.
pub fn thermal_weights(nbar: f64, cutoff: f64) -> (Vec<f64>, f64) {
    if nbar <= 0.0 {
        return (vec![1.0], 0.0);
    }
    let q = nbar / (1.0 + nbar);
    let mut weights = Vec::new();
    let mut p = 1.0 - q;
    let mut cum = 0.0;
    while cum < 1.0 - cutoff && p > 0.0 {
        weights.push(p);
        cum += p;
        p *= q;
    }
    // geometric remainder is exactly q^K
    let discarded = q.powi(weights.len() as i32);
    let kept: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= kept);
    (weights, discarded)
}

/// Isotropic coherent-state mixture with `P(I) = exp(-I/Delta)/(pi Delta)`.
///
/// This is Fock-diagonal: a thermal mixture with mean occupation
/// `Delta/hbar`, stored as one basis vector per occupied level.
pub fn build_initial(spec: &InitialSpec, params: &ModelParams) -> Result<DensityState> {
    params.validate()?;
    let dim = params.trunc.dim;
    if spec.delta_cap == 0.0 {
        return DensityState::fock(dim, 0);
    }
    let nbar = spec.delta_cap / params.hbar;
    let (weights, discarded) = thermal_weights(nbar, spec.weight_cutoff);
    let q = nbar / (1.0 + nbar);
    // untruncated geometric tail from n0 is q^n0
    let tail_levels = (params.trunc.tail_tol.ln() / q.ln()).ceil().max(0.0) as usize;
    let required = (weights.len() + 1)
        .max(((tail_levels as f64) / (1.0 - TAIL_FRACTION)).ceil() as usize + 1);
    if weights.len() > dim {
        return Err(Error::TruncationTooSmall { dim, required });
    }
    let tail: f64 = weights.iter().skip(tail_start(dim)).sum();
    if tail > params.trunc.tail_tol {
        return Err(Error::TruncationTooSmall { dim, required });
    }
    let k = weights.len();
    let mut amps = vec![Complex64::new(0.0, 0.0); dim * k];
    for n in 0..k {
        amps[n * dim + n] = Complex64::new(1.0, 0.0);
    }
    let mut state = DensityState::from_flat(dim, weights, amps)?;
    state.discarded_weight = discarded;
    Ok(state)
}

/// Smallest dim that `build_initial` accepts for this spec.
pub fn required_initial_dim(spec: &InitialSpec, params: &ModelParams) -> usize {
    if spec.delta_cap == 0.0 {
        return 2;
    }
    let nbar = spec.delta_cap / params.hbar;
    let (weights, _) = thermal_weights(nbar, spec.weight_cutoff);
    let q = nbar / (1.0 + nbar);
    let tail_levels = (params.trunc.tail_tol.ln() / q.ln()).ceil().max(0.0) as usize;
    (weights.len() + 1).max(((tail_levels as f64) / (1.0 - TAIL_FRACTION)).ceil() as usize + 1)
}

/// `<n> = sum_k p_k sum_n n |psi_k[n]|^2`.
pub fn mean_occupation(state: &DensityState) -> f64 {
    state
        .populations()
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// `Tr rho^2` from the ensemble Gram matrix.
pub fn purity(state: &DensityState) -> f64 {
    let k = state.n_members();
    let gram = linalg::cross_gram(state.amplitudes(), k, state.amplitudes(), k, state.dim());
    let w = state.weights();
    let mut acc = linalg::CompensatedSum::default();
    for j in 0..k {
        for i in 0..k {
            acc.add(w[i] * w[j] * gram[j * k + i].norm_sqr());
        }
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(hbar: f64, dim: usize) -> ModelParams {
        ModelParams::new(1.0, hbar, 0.0, TruncationPolicy::new(dim, 1e-10).unwrap()).unwrap()
    }

    #[test]
    fn zero_width_gives_ground_state() {
        let spec = InitialSpec::from_delta_cap(0.0, 1.0).unwrap();
        let s = build_initial(&spec, &params(1.0, 16)).unwrap();
        assert_eq!(s.n_members(), 1);
        assert_eq!(s.member(0)[0], Complex64::new(1.0, 0.0));
        assert_eq!(mean_occupation(&s), 0.0);
        assert_eq!(purity(&s), 1.0);
    }

    #[test]
    fn thermal_weights_halve_when_delta_equals_hbar() {
        let hbar = 0.3;
        let spec = InitialSpec::from_delta_cap(hbar, hbar).unwrap();
        let s = build_initial(&spec, &params(hbar, 64)).unwrap();
        for (n, &w) in s.weights().iter().take(20).enumerate() {
            let expected = 0.5f64.powi(n as i32 + 1);
            assert!((w - expected).abs() < 1e-10 * expected, "n={n}: {w} vs {expected}");
        }
        assert!(s.discarded_weight() <= 1e-10);
        assert!((mean_occupation(&s) - 1.0).abs() < 1e-8);
        // sum p_n^2 = (1/4)/(1 - 1/4) = 1/3
        assert!((purity(&s) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn thermal_state_is_fock_diagonal() {
        let spec = InitialSpec::from_delta_cap(0.4, 0.1).unwrap();
        let s = build_initial(&spec, &params(0.1, 256)).unwrap();
        let rho = s.density_matrix();
        let n = s.dim();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert_eq!(rho[i * n + j], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn too_small_dim_reports_requirement() {
        let spec = InitialSpec::from_delta_cap(0.49, 0.01).unwrap();
        match build_initial(&spec, &params(0.01, 100)) {
            Err(Error::TruncationTooSmall { dim, required }) => {
                assert_eq!(dim, 100);
                assert!(required > 1000);
                let ok = build_initial(&spec, &params(0.01, required));
                assert!(ok.is_ok(), "{ok:?}");
            }
            other => panic!("expected TruncationTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn delta_small_bookkeeping() {
        let hbar = 0.01;
        let a = InitialSpec::from_delta_small(0.5, hbar).unwrap();
        let b = InitialSpec::from_delta_cap(a.delta_cap, hbar).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.delta_small, a.delta_cap + hbar / 2.0);
        assert!(InitialSpec::from_delta_small(0.1, 1.0).is_err());
        assert_eq!(InitialSpec::from_delta_small(0.5, 1.0).unwrap().delta_cap, 0.0);
    }

    #[test]
    fn fock_five_has_occupation_five() {
        let s = DensityState::fock(8, 5).unwrap();
        assert_eq!(mean_occupation(&s), 5.0);
    }

    #[test]
    fn equal_mixture_purity_is_half() {
        let mut v0 = vec![Complex64::new(0.0, 0.0); 4];
        let mut v1 = v0.clone();
        v0[0] = Complex64::new(1.0, 0.0);
        v1[1] = Complex64::new(0.0, 1.0);
        let s = DensityState::new(4, vec![0.5, 0.5], vec![v0, v1]).unwrap();
        assert!((purity(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_states() {
        let v = vec![Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)];
        assert!(DensityState::pure(v).is_err());
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(DensityState::new(2, vec![0.7], vec![v.clone()]).is_err());
        assert!(DensityState::new(2, vec![-0.5, 1.5], vec![v.clone(), v]).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        let t = TruncationPolicy::new(16, 1e-8).unwrap();
        assert!(ModelParams::new(1.0, 0.0, 1.0, t).is_err());
        assert!(ModelParams::new(1.0, 1.0, -0.1, t).is_err());
        assert!(TruncationPolicy::new(1, 1e-8).is_err());
        assert!(TruncationPolicy::new(4, 0.0).is_err());
    }
}
