use kicked_harmonics::echo::{fidelity_closed_form, fidelity_linear, peres_fidelity, perturb};
use kicked_harmonics::harmonics::{harmonic_weights, m2_direct};
use kicked_harmonics::model::{build_initial, purity, DensityState, InitialSpec, ModelParams, TruncationPolicy};
use kicked_harmonics::random::{apply_unitary, random_state, random_unitary, rng};
use proptest::prelude::*;

fn state(seed: u64, dim: usize, members: usize) -> DensityState {
    let mut r = rng(seed);
    random_state(&mut r, dim, dim, members)
}

proptest! {
    // integration tests have no lib.rs to persist failures next to
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn unitaries_preserve_trace_and_purity(seed in any::<u64>(), dim in 2usize..12, members in 1usize..5) {
        let s = state(seed, dim, members);
        let u = random_unitary(&mut rng(seed ^ 1), dim);
        let t = apply_unitary(&u, &s);
        let trace: f64 = t.populations().iter().sum();
        prop_assert!((trace - 1.0).abs() < 1e-12);
        prop_assert!((purity(&t) - purity(&s)).abs() < 1e-12);
    }

    #[test]
    fn width_parametrizations_agree(delta_cap in 0.0f64..2.0, hbar in 0.05f64..1.0) {
        let a = InitialSpec::from_delta_cap(delta_cap, hbar).unwrap();
        let b = InitialSpec::from_delta_small(delta_cap + hbar / 2.0, hbar).unwrap();
        prop_assert!((a.delta_cap - b.delta_cap).abs() < 1e-12);
        prop_assert!((a.delta_small - b.delta_small).abs() < 1e-12);
    }

    #[test]
    fn rotation_leaves_harmonic_weights_unchanged(seed in any::<u64>(), dim in 2usize..24, xi in -7.0f64..7.0) {
        let s = state(seed, dim, 3);
        let a = harmonic_weights(&s);
        let b = harmonic_weights(&perturb(&s, xi));
        for m in 0..dim as i64 {
            prop_assert!((a.weight(m) - b.weight(m)).abs() < 1e-13);
        }
    }

    #[test]
    fn harmonic_weights_are_symmetric_and_normalized(seed in any::<u64>(), dim in 2usize..24) {
        let spec = harmonic_weights(&state(seed, dim, 2));
        let mut total = 0.0;
        for m in -(dim as i64)..=dim as i64 {
            prop_assert!(spec.weight(m) >= 0.0);
            prop_assert_eq!(spec.weight(m), spec.weight(-m));
            total += spec.weight(m);
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gram_m2_matches_spectrum(seed in any::<u64>(), dim in 2usize..40, members in 1usize..6) {
        let s = state(seed, dim, members);
        let a = harmonic_weights(&s).m2();
        prop_assert!((m2_direct(&s) - a).abs() <= 1e-11 * a.max(1.0));
    }

    #[test]
    fn closed_form_equals_trace_fidelity(seed in any::<u64>(), dim in 2usize..40, xi in 0.0f64..std::f64::consts::PI) {
        let s = state(seed, dim, 1 + (seed % 4) as usize);
        let direct = peres_fidelity(&perturb(&s, xi), &s).unwrap();
        let closed = fidelity_closed_form(&harmonic_weights(&s), xi);
        prop_assert!((direct - closed).abs() <= 1e-10);
    }

    #[test]
    fn fidelity_stays_within_bounds(seed in any::<u64>(), dim in 2usize..40, xi in 0.0f64..std::f64::consts::PI) {
        let spec = harmonic_weights(&state(seed, dim, 3));
        let off: f64 = spec.iter().filter(|(m, _)| *m != 0).map(|(_, p)| p).sum();
        let f = fidelity_closed_form(&spec, xi);
        prop_assert!(f <= 1.0 + 1e-12);
        prop_assert!(f >= (1.0 - 2.0 * off).max(0.0) - 1e-12);
    }

    #[test]
    fn linear_fidelity_obeys_taylor_bound(seed in any::<u64>(), dim in 2usize..20, xi in 0.0f64..0.05) {
        let spec = harmonic_weights(&state(seed, dim, 2));
        let gap = (fidelity_linear(&spec, xi) - fidelity_closed_form(&spec, xi)).abs();
        prop_assert!(gap <= xi.powi(4) * spec.moment(4) / 24.0 + 1e-13);
    }
}

#[test]
fn thermal_populations_match_closed_form() {
    for &(delta_cap, hbar) in &[(1.0, 1.0), (0.45, 0.1), (0.3, 0.5)] {
        let params = ModelParams::new(1.0, hbar, 0.0, TruncationPolicy::new(256, 1e-12).unwrap()).unwrap();
        let spec = InitialSpec::from_delta_cap(delta_cap, hbar).unwrap().with_weight_cutoff(1e-14);
        let s = build_initial(&spec, &params).unwrap();
        let nbar: f64 = delta_cap / hbar;
        for (n, p) in s.populations().iter().enumerate().take(20) {
            let exact = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
            assert!((p - exact).abs() < 1e-12, "Delta {delta_cap} hbar {hbar} n {n}: {p} vs {exact}");
        }
    }
}
