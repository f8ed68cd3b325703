use kicked_harmonics::classical::{
    classical_m2, classical_step, classical_step_inverse, mean_action, ClassicalEnsemble,
};
use kicked_harmonics::model::{DensityState, ModelParams, Seed, TruncationPolicy};
use kicked_harmonics::propagator::{build_floquet, displacement_matrix, step};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mean_lowering(state: &DensityState) -> Complex64 {
    let psi = state.member(0);
    (0..psi.len() - 1)
        .map(|n| ((n + 1) as f64).sqrt() * psi[n].conj() * psi[n + 1])
        .sum()
}

#[test]
fn classical_rotation_sense_matches_quantum_coherent_state() {
    let hbar = 0.01;
    let dim = 160;
    let params = ModelParams::new(1.0, hbar, 0.2, TruncationPolicy::new(dim, 1e-10).unwrap()).unwrap();
    let alpha0 = Complex64::new(0.5, 0.3);
    let d = displacement_matrix(alpha0 / hbar.sqrt(), dim).unwrap();
    let psi: Vec<Complex64> = (0..dim).map(|n| d[n * dim]).collect();
    let state = DensityState::pure(psi).unwrap();
    let before = mean_lowering(&state) * hbar.sqrt();
    assert!((before - alpha0).norm() < 1e-10);

    let op = build_floquet(&params).unwrap();
    let quantum = mean_lowering(&step(&state, &op).unwrap()) * hbar.sqrt();

    let ens = ClassicalEnsemble { points: vec![alpha0], seed: Seed(0), t: 0 };
    let classical = classical_step(&ens, &params).points[0];
    // opposite rotation sense for comparison
    let mirrored = alpha0 * Complex64::from_polar(1.0, 1.0 + 2.0 * alpha0.norm_sqr())
        + Complex64::new(0.0, params.g0);

    let err = (quantum - classical).norm();
    let wrong = (quantum - mirrored).norm();
    assert!(err < 0.02, "quantum {quantum} classical {classical}");
    assert!(wrong > 0.3, "mirrored map is not excluded: {wrong}");
}

#[test]
fn cosine_modulated_angles_give_quarter_first_harmonic() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let delta = 0.5;
    let n = 200_000;
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        if rng.random_range(0.0..2.0) > 1.0 + theta.cos() {
            continue;
        }
        let action = -delta * (1.0 - rng.random::<f64>()).ln();
        points.push(Complex64::from_polar(action.sqrt(), -theta));
    }
    let ens = ClassicalEnsemble { points, seed: Seed(17), t: 0 };
    let est = classical_m2(&ens, 64, 16).unwrap();
    let s = &est.spectrum;
    let ratio = s.weight(1) / s.weight(0);
    assert!((ratio - 0.25).abs() < 0.01, "P1/P0 = {ratio}");
    assert!(s.weight(2) / s.weight(0) < 0.01);
    assert!((s.weight(1) - s.weight(-1)).abs() < 1e-15);
}

#[test]
fn echo_with_zero_perturbation_retraces_short_chaotic_runs() {
    let params = ModelParams::new(1.0, 1.0, 2.0, TruncationPolicy::new(16, 1e-8).unwrap()).unwrap();
    let start = kicked_harmonics::classical::sample_initial(0.5, 2000, Seed(3)).unwrap();
    let mut cur = start.clone();
    let steps = 4;
    for _ in 0..steps {
        cur = classical_step(&cur, &params);
    }
    assert!(mean_action(&cur) > 10.0);
    for _ in 0..steps {
        cur = classical_step_inverse(&cur, &params);
    }
    let worst = start.points.iter().zip(&cur.points).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "worst {worst:e}");
}
