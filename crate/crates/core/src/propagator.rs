//! One kick period of the quartic oscillator on Fock-basis ensembles.
//!
//! The free part `exp(-i(omega0 n + hbar n^2))` is diagonal. The kick
//! `exp(i g0/sqrt(hbar) (a + a†))` is the displacement operator `D(lambda)`
//! with `lambda = i g0 / sqrt(hbar)`, built from closed-form matrix elements
//! via a rescaled Laguerre recurrence.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gemm_into, MatView};
use crate::model::{DensityState, ModelParams};

/// Entries below this magnitude are treated as outside the kick band.
const BAND_EPS: f64 = 1e-17;

const RESCALE_LIMIT: f64 = 1e150;

/// Below this log-scale every representable `cur` underflows to zero.
const UNDERFLOW_LOG_SCALE: f64 = -760.0 - 150.0 * std::f64::consts::LN_10;

/// Bands of the displacement matrix computed together.
const BAND_BLOCK: usize = 16;

/// Norm changes below this are round-off, not truncation loss.
const NORM_ROUNDOFF: f64 = 1e-13;

/// Input amplitudes with squared modulus below this are not propagated.
const COLUMN_EPS_SQ: f64 = 1e-40;

/// Margin, in units of the coherent amplitude, left between a column's
/// displaced support and the basis edge.
const GUARD_MARGIN: f64 = 1.5;

/// Which half-period comes first within one Floquet step. Observables are
/// sampled at the end of each full period.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickOrdering {
    #[default]
    FreeThenKick,
    KickThenFree,
}

#[derive(Clone, Debug)]
pub struct FloquetOperator {
    dim: usize,
    free_phases: Vec<f64>,
    /// Row-major `dim × dim`.
    kick: Vec<Complex64>,
    /// For each column, one past the last row with a non-negligible entry.
    col_row_end: Vec<usize>,
    ordering: KickOrdering,
    tail_tol: f64,
    lambda_abs: f64,
}

/// `ln(k!)` for `k = 0..=n`, accumulated with compensation.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = crate::linalg::CompensatedSum::default();
    out.push(0.0);
    for k in 1..=n {
        acc.add((k as f64).ln());
        out.push(acc.value());
    }
    out
}

/// Displacement operator `D(lambda) = exp(lambda a† - lambda* a)` truncated to
/// `dim` levels, row-major.
///
/// Uses `<n+m|D|n> = sqrt(n!/(n+m)!) lambda^m e^{-x/2} L_n^{(m)}(x)` and
/// `<n|D|n+m> = sqrt(n!/(n+m)!) (-lambda*)^m e^{-x/2} L_n^{(m)}(x)`, `x = |lambda|^2`.
/// For each band `m` the normalized sequence
/// `g_n = sqrt(n!/(n+m)!) x^{m/2} e^{-x/2} L_n^{(m)}(x)` obeys
/// `g_{n+1} sqrt((n+1)(n+1+m)) = (2n+1+m-x) g_n - sqrt(n(n+m)) g_{n-1}`,
/// run forward from `ln g_0 = (m/2) ln x - x/2 - ln(m!)/2` with a separate
/// log-scale so that underflowing starts stay representable.
pub fn displacement_matrix(lambda: Complex64, dim: usize) -> Result<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut d = vec![zero; dim * dim];
    let x = lambda.norm_sqr();
    if x == 0.0 {
        for n in 0..dim {
            d[n * dim + n] = Complex64::new(1.0, 0.0);
        }
        return Ok(d);
    }
    let lnfac = ln_factorials(dim);
    let ln_x = x.ln();
    let unit_lower = lambda / lambda.norm();
    let unit_upper = -lambda.conj() / lambda.norm();
    let roots: Vec<f64> = (0..=dim + 1).map(|k| (k as f64).sqrt()).collect();
    let inv_roots: Vec<f64> = roots.iter().map(|r| 1.0 / r).collect();

    // bands are computed in blocks and written row by row so that the
    // stores for neighbouring bands land in the same cache lines
    let mut bands = vec![0.0f64; BAND_BLOCK * dim];
    for m0 in (0..dim).step_by(BAND_BLOCK) {
        let width = BAND_BLOCK.min(dim - m0);
        let mut lower = [zero; BAND_BLOCK];
        let mut upper = [zero; BAND_BLOCK];
        for j in 0..width {
            let m = m0 + j;
            let g = &mut bands[j * dim..j * dim + dim - m];
            band_values(g, m, x, 0.5 * m as f64 * ln_x - 0.5 * x - 0.5 * lnfac[m], &roots, &inv_roots);
            if let Some(n) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { n, m });
            }
            lower[j] = unit_lower.powu(m as u32);
            upper[j] = unit_upper.powu(m as u32);
        }
        for r in m0..dim {
            let row = &mut d[r * dim..(r + 1) * dim];
            for j in 0..width.min(r - m0 + 1) {
                let n = r - m0 - j;
                row[n] = lower[j] * bands[j * dim + n];
            }
        }
        for n in 0..dim - m0 {
            let row = &mut d[n * dim..(n + 1) * dim];
            for j in 0..width.min(dim - m0 - n) {
                if m0 + j > 0 {
                    row[n + m0 + j] = upper[j] * bands[j * dim + n];
                }
            }
        }
    }
    Ok(d)
}

/// Fills `g_n` for one band from the three-term recurrence, starting at
/// `ln g_0 = ln_start` and carrying a separate scale so that underflowing
/// starts stay representable.
fn band_values(g: &mut [f64], m: usize, x: f64, ln_start: f64, roots: &[f64], inv_roots: &[f64]) {
    let mf = m as f64;
    let mut log_scale = ln_start;
    let mut scale = log_scale.exp();
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    g[0] = scale;
    for n in 0..g.len() - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + mf - x) * cur - roots[n] * roots[n + m] * prev)
            * (inv_roots[n + 1] * inv_roots[n + 1 + m]);
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_LIMIT {
            cur /= RESCALE_LIMIT;
            prev /= RESCALE_LIMIT;
            log_scale += RESCALE_LIMIT.ln();
            scale = log_scale.exp();
        }
        g[n + 1] = if log_scale > -700.0 {
            cur * scale
        } else if cur == 0.0 || log_scale < UNDERFLOW_LOG_SCALE {
            0.0
        } else {
            cur.signum() * (cur.abs().ln() + log_scale).exp()
        };
    }
}

impl FloquetOperator {
    /// Assembles an operator from explicit parts. The kick matrix is
    /// row-major and is not checked for unitarity.
    pub fn from_parts(
        free_phases: Vec<f64>,
        kick: Vec<Complex64>,
        ordering: KickOrdering,
        tail_tol: f64,
    ) -> Result<Self> {
        let dim = free_phases.len();
        if kick.len() != dim * dim {
            return Err(Error::DimMismatch { expected: dim * dim, got: kick.len() });
        }
        let mut col_row_end = vec![0; dim];
        for (r, row) in kick.chunks_exact(dim.max(1)).enumerate() {
            for (end, v) in col_row_end.iter_mut().zip(row) {
                if v.norm_sqr() > BAND_EPS * BAND_EPS {
                    *end = r + 1;
                }
            }
        }
        Ok(FloquetOperator {
            dim,
            free_phases,
            kick,
            col_row_end,
            ordering,
            tail_tol,
            lambda_abs: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn identity_placeholder() -> Self {
        FloquetOperator {
            dim: 1,
            free_phases: vec![0.0],
            kick: vec![Complex64::new(1.0, 0.0)],
            col_row_end: vec![1],
            ordering: KickOrdering::default(),
            tail_tol: 1.0,
            lambda_abs: 0.0,
        }
    }

    pub fn free_phases(&self) -> &[f64] {
        &self.free_phases
    }

    pub fn kick_matrix(&self) -> &[Complex64] {
        &self.kick
    }

    pub fn ordering(&self) -> KickOrdering {
        self.ordering
    }

    pub fn with_ordering(mut self, ordering: KickOrdering) -> Self {
        self.ordering = ordering;
        self
    }

    /// Columns whose displaced image fits inside the truncated basis:
    /// `n < 0.9 dim` and `(sqrt(n) + |lambda| + 8)^2 <= dim`.
    pub fn guarded_block(&self) -> usize {
        let n = self.dim as f64;
        let by_fraction = (n * 0.9).floor();
        let reach = n.sqrt() - self.lambda_abs - GUARD_MARGIN;
        let by_band = if reach > 0.0 { (reach * reach).floor() } else { 0.0 };
        by_fraction.min(by_band) as usize
    }

    /// `max |(K†K - I)_{nn'}|` over the guarded block.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let guard = self.guarded_block();
        if guard == 0 {
            return 0.0;
        }
        let mut prod = vec![Complex64::new(0.0, 0.0); guard * guard];
        let k = MatView::row_major(&self.kick, n, 0, 0, n, guard);
        gemm_into(k.adjoint(), k, &mut prod, 0, guard);
        let mut worst = 0.0f64;
        for j in 0..guard {
            for i in 0..guard {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[j * guard + i] - target).norm());
            }
        }
        worst
    }

    fn apply_free(&self, amps: &mut [Complex64], sign: f64) {
        for v in amps.chunks_exact_mut(self.dim) {
            for (a, &phi) in v.iter_mut().zip(&self.free_phases) {
                *a *= Complex64::from_polar(1.0, -sign * phi);
            }
        }
    }

    /// Kick (or its adjoint) applied to every member, restricted to the
    /// occupied column range and the rows the band reaches from it.
    fn apply_kick(&self, amps: &[Complex64], members: usize, adjoint: bool) -> Vec<Complex64> {
        let n = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        let col_end = amps
            .chunks_exact(n)
            .map(|v| v.iter().rposition(|a| a.norm_sqr() > COLUMN_EPS_SQ).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0);
        if col_end == 0 {
            return out;
        }
        // |K_rc| = |K_cr| for displacement matrices but not for arbitrary
        // parts, so the adjoint path uses the full row range.
        let row_end = if adjoint {
            n
        } else {
            self.col_row_end[..col_end].iter().copied().max().unwrap_or(n)
        };
        let base = MatView::row_major(&self.kick, n, 0, 0, n, n);
        let mat = if adjoint {
            MatView::row_major(&self.kick, n, 0, 0, col_end, n).adjoint()
        } else {
            MatView { rows: row_end, cols: col_end, ..base }
        };
        let x = MatView::col_major(amps, n, 0, 0, col_end, members);
        gemm_into(mat, x, &mut out, 0, n);
        out
    }

    /// Rejects a step whose result either populates the top of the basis
    /// or lost norm through the truncation edge.
    fn check_tail(&self, before: &DensityState, after: &DensityState) -> Result<()> {
        let lost = total_population(before) - total_population(after);
        let lost = if lost > NORM_ROUNDOFF { lost } else { 0.0 };
        let tail = after.tail_mass().max(lost);
        if tail > self.tail_tol {
            return Err(Error::TailExceeded {
                step: None,
                tail_mass: tail,
                tail_tol: self.tail_tol,
                dim: self.dim,
            });
        }
        Ok(())
    }
}

/// Builds the one-period operator for `params`.
pub fn build_floquet(params: &ModelParams) -> Result<FloquetOperator> {
    params.validate()?;
    let dim = params.trunc.dim;
    let free_phases = (0..dim)
        .map(|n| {
            let n = n as f64;
            params.omega0 * n + params.hbar * n * n
        })
        .collect();
    let lambda = Complex64::new(0.0, params.g0 / params.hbar.sqrt());
    let kick = displacement_matrix(lambda, dim)?;
    let mut op =
        FloquetOperator::from_parts(free_phases, kick, KickOrdering::default(), params.trunc.tail_tol)?;
    op.lambda_abs = lambda.norm();
    Ok(op)
}

fn check_dim(state: &DensityState, op: &FloquetOperator) -> Result<()> {
    if state.dim() != op.dim {
        return Err(Error::DimMismatch { expected: op.dim, got: state.dim() });
    }
    Ok(())
}

/// Advances every member by one period.
pub fn step(state: &DensityState, op: &FloquetOperator) -> Result<DensityState> {
    check_dim(state, op)?;
    let k = state.n_members();
    let amps = match op.ordering {
        KickOrdering::FreeThenKick => {
            let mut a = state.amplitudes().to_vec();
            op.apply_free(&mut a, 1.0);
            op.apply_kick(&a, k, false)
        }
        KickOrdering::KickThenFree => {
            let mut a = op.apply_kick(state.amplitudes(), k, false);
            op.apply_free(&mut a, 1.0);
            a
        }
    };
    let next = state.with_amplitudes(amps);
    op.check_tail(state, &next)?;
    Ok(next)
}

/// Exact adjoint of [`step`].
pub fn step_inverse(state: &DensityState, op: &FloquetOperator) -> Result<DensityState> {
    check_dim(state, op)?;
    let k = state.n_members();
    let amps = match op.ordering {
        KickOrdering::FreeThenKick => {
            let mut a = op.apply_kick(state.amplitudes(), k, true);
            op.apply_free(&mut a, -1.0);
            a
        }
        KickOrdering::KickThenFree => {
            let mut a = state.amplitudes().to_vec();
            op.apply_free(&mut a, -1.0);
            op.apply_kick(&a, k, true)
        }
    };
    let next = state.with_amplitudes(amps);
    op.check_tail(state, &next)?;
    Ok(next)
}

fn total_population(state: &DensityState) -> f64 {
    state
        .members()
        .map(|(p, v)| p * v.iter().map(|a| a.norm_sqr()).sum::<f64>())
        .sum()
}

/// Something that advances a state by one period in either direction.
pub trait Stepper {
    fn forward(&mut self, state: &DensityState, t: usize) -> Result<DensityState>;
    fn backward(&mut self, state: &DensityState, t: usize) -> Result<DensityState>;
}

impl Stepper for FloquetOperator {
    fn forward(&mut self, state: &DensityState, t: usize) -> Result<DensityState> {
        step(state, self).map_err(|e| e.at_step(t))
    }

    fn backward(&mut self, state: &DensityState, t: usize) -> Result<DensityState> {
        step_inverse(state, self).map_err(|e| e.at_step(t))
    }
}

impl Stepper for AdaptiveEvolver {
    fn forward(&mut self, state: &DensityState, t: usize) -> Result<DensityState> {
        self.advance(state, t, false)
    }

    fn backward(&mut self, state: &DensityState, t: usize) -> Result<DensityState> {
        self.advance(state, t, true)
    }
}

/// Shrinking the basis may drop at most this fraction of `tail_tol`.
const SHRINK_LOSS_FRACTION: f64 = 1e-2;

/// The basis shrinks once the planned size falls below this fraction of it.
const SHRINK_RATIO: f64 = 0.8;

/// Basis sizes are rounded up to this multiple.
const DIM_QUANTUM: usize = 64;

/// Extra headroom (in coherent amplitude units) when sizing the basis
/// ahead of a step.
const PLAN_MARGIN: f64 = 6.0;


/// Stepper that grows the Fock basis as the state spreads, up to `ceiling`.
///
/// Before each step the basis is sized so that the displaced support fits;
/// a step rejected by the tail guard is retried with a larger basis.
#[derive(Clone, Debug)]
pub struct AdaptiveEvolver {
    params: ModelParams,
    ordering: KickOrdering,
    ceiling: usize,
    op: Arc<FloquetOperator>,
    /// `(step, new_dim)` for every change of basis size.
    pub escalations: Vec<(usize, usize)>,
    max_tail: f64,
    peak_dim: usize,
}

impl AdaptiveEvolver {
    pub fn new(params: &ModelParams, ceiling: usize) -> Result<Self> {
        if params.trunc.dim > ceiling {
            return Err(Error::CeilingReached { ceiling, needed: params.trunc.dim });
        }
        Ok(AdaptiveEvolver {
            params: *params,
            ordering: KickOrdering::default(),
            ceiling,
            op: Arc::new(build_floquet(params)?),
            escalations: Vec::new(),
            max_tail: 0.0,
            peak_dim: params.trunc.dim,
        })
    }

    pub fn with_ordering(mut self, ordering: KickOrdering) -> Self {
        self.ordering = ordering;
        self.op = Arc::new((*self.op).clone().with_ordering(ordering));
        self
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    pub fn ceiling(&self) -> usize {
        self.ceiling
    }

    pub fn operator(&self) -> &FloquetOperator {
        &self.op
    }

    /// Largest basis used so far.
    pub fn peak_dim(&self) -> usize {
        self.peak_dim
    }

    /// Largest tail mass seen after an accepted step.
    pub fn max_tail_mass(&self) -> f64 {
        self.max_tail
    }

    fn resize_to(&mut self, dim: usize, t: usize) -> Result<()> {
        self.params = self.params.with_dim(dim);
        // drop the old operator before building the larger one
        self.op = Arc::new(FloquetOperator::identity_placeholder());
        self.op = Arc::new(build_floquet(&self.params)?.with_ordering(self.ordering));
        self.escalations.push((t, dim));
        self.peak_dim = self.peak_dim.max(dim);
        Ok(())
    }

    fn planned_dim(&self, state: &DensityState) -> usize {
        let eps = self.params.trunc.tail_tol.sqrt();
        let s = state.support_end(eps) as f64;
        let reach = s.sqrt() + self.op.lambda_abs + PLAN_MARGIN;
        let need = (reach * reach / (1.0 - crate::model::TAIL_FRACTION)).ceil() as usize;
        need.div_ceil(DIM_QUANTUM) * DIM_QUANTUM
    }

    fn advance(&mut self, state: &DensityState, t: usize, inverse: bool) -> Result<DensityState> {
        let planned = self.planned_dim(state);
        let mut shrunk = None;
        if (planned as f64) <= SHRINK_RATIO * self.op.dim.max(state.dim()) as f64 && planned < state.dim() {
            let (small, lost) = state.truncated(planned);
            if lost <= self.params.trunc.tail_tol * SHRINK_LOSS_FRACTION {
                if self.op.dim != planned {
                    self.resize_to(planned, t)?;
                }
                shrunk = Some(small);
            }
        }
        let state = shrunk.as_ref().unwrap_or(state);
        // a state handed over from another evolver may be wider than this basis
        if state.dim() > self.op.dim {
            if state.dim() > self.ceiling {
                return Err(Error::CeilingReached { ceiling: self.ceiling, needed: state.dim() });
            }
            self.resize_to(state.dim(), t)?;
        }
        if planned > self.op.dim {
            let next = planned.max(self.op.dim + self.op.dim / 4).min(self.ceiling);
            if next > self.op.dim {
                self.resize_to(next, t)?;
            }
        }
        loop {
            let input = if state.dim() == self.op.dim { state.clone() } else { state.resized(self.op.dim)? };
            let op: &FloquetOperator = &self.op;
            let res = if inverse { step_inverse(&input, op) } else { step(&input, op) };
            match res {
                Ok(next) => {
                    self.max_tail = self.max_tail.max(next.tail_mass());
                    return Ok(next);
                }
                Err(Error::TailExceeded { .. }) if self.op.dim < self.ceiling => {
                    let next = (self.op.dim * 3 / 2).div_ceil(DIM_QUANTUM) * DIM_QUANTUM;
                    self.resize_to(next.min(self.ceiling), t)?;
                }
                Err(Error::TailExceeded { .. }) => {
                    return Err(Error::CeilingReached { ceiling: self.ceiling, needed: planned.max(self.ceiling + 1) });
                }
                Err(e) => return Err(e.at_step(t)),
            }
        }
    }
}

/// Runs `steps` periods, returning the state after each one (not including
/// the input).
pub fn evolve(state: &DensityState, op: &FloquetOperator, steps: usize) -> Result<Vec<DensityState>> {
    let mut out = Vec::with_capacity(steps);
    let mut cur = state.clone();
    for t in 1..=steps {
        cur = step(&cur, op).map_err(|e| e.at_step(t))?;
        out.push(cur.clone());
    }
    Ok(out)
}


#[cfg(test)]
mod adaptive_tests {
    use super::*;
    use crate::model::TruncationPolicy;

    #[test]
    fn growing_basis_matches_fixed_basis() {
        let params = ModelParams::new(1.0, 0.5, 1.0, TruncationPolicy::new(16, 1e-20).unwrap()).unwrap();
        let start = DensityState::fock(16, 0).unwrap();
        let mut ev = AdaptiveEvolver::new(&params, 4096).unwrap();
        let mut cur = start.clone();
        for t in 1..=8 {
            cur = ev.forward(&cur, t).unwrap();
        }
        assert!(!ev.escalations.is_empty());
        let dim = ev.dim();
        let big = build_floquet(&params.with_dim(dim)).unwrap();
        let mut reference = start.resized(dim).unwrap();
        for _ in 0..8 {
            reference = step(&reference, &big).unwrap();
        }
        let worst = cur
            .amplitudes()
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst {worst:e}");
    }

    #[test]
    fn accepts_states_wider_than_its_basis() {
        let params = ModelParams::new(1.0, 0.5, 1.0, TruncationPolicy::new(16, 1e-20).unwrap()).unwrap();
        let wide = DensityState::fock(512, 0).unwrap();
        let mut ev = AdaptiveEvolver::new(&params, 4096).unwrap();
        let next = ev.forward(&wide, 1).unwrap();
        let mut reference = AdaptiveEvolver::new(&params, 4096).unwrap();
        let expected = reference.forward(&DensityState::fock(16, 0).unwrap(), 1).unwrap();
        let n = next.dim().min(expected.dim());
        let worst = (0..n).map(|i| (next.amplitudes()[i] - expected.amplitudes()[i]).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "worst {worst:e}");
        // a wide state with mass far out keeps its width
        let mut far = vec![Complex64::new(0.0, 0.0); 512];
        far[300] = Complex64::new(1.0, 0.0);
        let far = DensityState::pure(far).unwrap();
        let mut ev = AdaptiveEvolver::new(&params, 4096).unwrap();
        assert!(ev.forward(&far, 1).unwrap().dim() >= 512);
    }

    #[test]
    fn ceiling_is_reported() {
        let params = ModelParams::new(1.0, 0.1, 1.5, TruncationPolicy::new(64, 1e-12).unwrap()).unwrap();
        let mut ev = AdaptiveEvolver::new(&params, 256).unwrap();
        let mut cur = DensityState::fock(64, 0).unwrap();
        let mut hit = None;
        for t in 1..=20 {
            match ev.forward(&cur, t) {
                Ok(next) => cur = next,
                Err(e) => {
                    hit = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(hit, Some(Error::CeilingReached { ceiling: 256, .. })), "{hit:?}");
        assert!(ev.dim() <= 256);
    }
}
