use kicked_harmonics::harmonics::m2_direct;
use kicked_harmonics::model::{purity, ModelParams, TruncationPolicy};
use kicked_harmonics::propagator::{build_floquet, step, step_inverse};
use kicked_harmonics::random::{random_state, rng};

fn params(g0: f64) -> ModelParams {
    ModelParams::new(1.0, 1.0, g0, TruncationPolicy::new(64, 1e-12).unwrap()).unwrap()
}

#[test]
fn norm_and_purity_survive_one_hundred_periods() {
    let op = build_floquet(&params(0.1)).unwrap();
    let mut s = random_state(&mut rng(1), 64, 8, 3);
    let p0 = purity(&s);
    for _ in 0..100 {
        s = step(&s, &op).unwrap();
        let trace: f64 = s.populations().iter().sum();
        assert!((trace - 1.0).abs() < 1e-12, "trace {trace}");
        assert!((purity(&s) - p0).abs() < 1e-12);
    }
}

#[test]
fn forward_then_inverse_returns_the_state() {
    let op = build_floquet(&params(0.1)).unwrap();
    let s0 = random_state(&mut rng(2), 64, 8, 2);
    let mut s = s0.clone();
    for _ in 0..20 {
        s = step(&s, &op).unwrap();
    }
    for _ in 0..20 {
        s = step_inverse(&s, &op).unwrap();
    }
    let dev = s.amplitudes().iter().zip(s0.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(dev <= 1e-12, "deviation {dev}");
}

#[test]
fn free_evolution_keeps_m2_over_one_hundred_periods() {
    let op = build_floquet(&params(0.0)).unwrap();
    let mut s = random_state(&mut rng(3), 64, 32, 3);
    let m0 = m2_direct(&s);
    for _ in 0..100 {
        s = step(&s, &op).unwrap();
        assert!((m2_direct(&s) - m0).abs() <= 1e-12 * m0);
    }
}
