use kicked_harmonics::random as common;

use kicked_harmonics::harmonics::harmonic_weights;
use kicked_harmonics::model::{build_initial, DensityState, InitialSpec, ModelParams, TruncationPolicy};
use kicked_harmonics::oracle::{harmonics_from_grid, m2_from_grid, wigner_on_grid, GridSpec};
use num_complex::Complex64;

#[test]
fn two_level_superposition_m2_is_one_half() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = DensityState::pure(vec![Complex64::new(h, 0.0), Complex64::new(0.0, h)]).unwrap();
    let grid = wigner_on_grid(&s, 1.0, &GridSpec::default()).unwrap();
    let m2 = m2_from_grid(&grid).unwrap();
    assert!((m2 - 0.5).abs() < 1e-6 * 0.5, "oracle m2 {m2}");
    assert!((harmonic_weights(&s).m2() - 0.5).abs() < 1e-15);
}

#[test]
fn random_states_match_band_reduction() {
    let mut rng = common::rng(7);
    for (i, hbar) in [1.0, 0.1, 0.37].iter().cycle().take(12).enumerate() {
        let support = 2 + (i * 5) % 15;
        let members = 1 + i % 4;
        let s = common::random_state(&mut rng, 20, support, members);
        let grid = wigner_on_grid(&s, *hbar, &GridSpec::default()).unwrap();
        assert!(grid.max_imag < 1e-10 * grid.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        assert!((grid.normalization() - 1.0).abs() < 1e-8);
        let oracle = harmonics_from_grid(&grid).unwrap();
        let analyzer = harmonic_weights(&s);
        let rel = (oracle.m2() - analyzer.m2()).abs() / analyzer.m2();
        assert!(rel < 1e-6, "state {i}: oracle {} analyzer {} rel {rel:e}", oracle.m2(), analyzer.m2());
        for m in 0..=analyzer.max_harmonic() as i64 {
            assert!((oracle.weight(m) - analyzer.weight(m)).abs() < 1e-8, "P_{m}");
        }
        assert!((grid.purity() - kicked_harmonics::model::purity(&s)).abs() < 1e-6);
    }
}

#[test]
fn full_support_state_matches() {
    let mut rng = common::rng(11);
    let s = common::random_state(&mut rng, 33, 33, 2);
    let grid = wigner_on_grid(&s, 1.0, &GridSpec::default()).unwrap();
    let rel = (m2_from_grid(&grid).unwrap() - harmonic_weights(&s).m2()).abs() / harmonic_weights(&s).m2();
    assert!(rel < 1e-6, "rel {rel:e}");
}

#[test]
fn thermal_wigner_width_is_delta_plus_half_hbar() {
    let hbar = 0.5;
    let delta = 0.1;
    let spec = InitialSpec::from_delta_cap(delta, hbar).unwrap().with_weight_cutoff(1e-15);
    let params = ModelParams::new(1.0, hbar, 0.0, TruncationPolicy::new(64, 1e-12).unwrap()).unwrap();
    // nbar = 0.2: cumulative cutoff keeps levels well inside the oracle domain
    let s = build_initial(&spec, &params).unwrap();
    assert!(s.n_members() <= 33);
    let grid = wigner_on_grid(&s, hbar, &GridSpec::default()).unwrap();
    let width = delta + hbar / 2.0;
    for j in [5usize, 40, 120] {
        let i = grid.actions[j];
        let expected = (-i / width).exp() / (std::f64::consts::PI * width);
        let got = grid.value_at(j, 3);
        assert!((got - expected).abs() < 1e-12, "I={i}: {got} vs {expected}");
    }
    assert_eq!(m2_from_grid(&grid).unwrap(), 0.0);
}

#[test]
fn grid_refinement_converges() {
    let mut rng = common::rng(3);
    let s = common::random_state(&mut rng, 16, 10, 3);
    let coarse = wigner_on_grid(&s, 0.2, &GridSpec::default()).unwrap();
    let fine = wigner_on_grid(
        &s,
        0.2,
        &GridSpec { radial_panels: Some(120), nodes_per_panel: 16, n_angles: Some(2 * coarse.n_angles), action_cut: None },
    )
    .unwrap();
    let a = m2_from_grid(&coarse).unwrap();
    let b = m2_from_grid(&fine).unwrap();
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}
