//! Seeded random states and unitaries for invariant checks.

use crate::model::DensityState;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random normalized vector with amplitudes on levels `0..support`.
pub fn random_vector(rng: &mut ChaCha8Rng, dim: usize, support: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for a in v.iter_mut().take(support) {
        *a = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Random mixture of `members` vectors supported on `0..support`.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize, support: usize, members: usize) -> DensityState {
    let mut w: Vec<f64> = (0..members).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let fix: f64 = 1.0 - w.iter().sum::<f64>();
    w[0] += fix;
    let vecs = (0..members).map(|_| random_vector(rng, dim, support)).collect();
    DensityState::new(dim, w, vecs).unwrap()
}

/// Random unitary (QR of a complex Gaussian matrix via Gram–Schmidt), row-major.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        for _ in 0..2 {
            for c in &cols {
                let proj: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(c) {
                    *x -= proj * y;
                }
            }
        }
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        cols.push(v);
    }
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, z) in c.iter().enumerate() {
            u[i * n + j] = *z;
        }
    }
    u
}

pub fn apply_unitary(u: &[Complex64], state: &DensityState) -> DensityState {
    let n = state.dim();
    let vecs = state
        .members()
        .map(|(_, v)| (0..n).map(|i| (0..n).map(|j| u[i * n + j] * v[j]).sum()).collect())
        .collect();
    DensityState::new(n, state.weights().to_vec(), vecs).unwrap()
}
