use proptest::prelude::*;
use rbm_qst::dataset::sample_measurements;
use rbm_qst::math::total_variation;
use rbm_qst::tfim::{free_fermion_energy, solve_ground_state, TfimSpec};

#[test]
fn lanczos_matches_free_fermions_over_the_scan() {
    for n in 2..=14 {
        for h in [0.2, 0.5, 0.8, 1.0, 1.5, 2.0] {
            let spec = TfimSpec::new(n, 1.0, h).unwrap();
            let e = solve_ground_state(&spec).unwrap().energy;
            let ff = free_fermion_energy(&spec).unwrap();
            assert!((e - ff).abs() < 1e-8, "N={n} h={h}: {e} vs {ff}");
        }
    }
}

#[test]
fn sampling_is_byte_reproducible() {
    let gs = solve_ground_state(&TfimSpec::new(6, 1.0, 0.8).unwrap()).unwrap();
    let write = |seed| {
        let mut buf = Vec::new();
        sample_measurements(&gs, 5000, seed)
            .unwrap()
            .write_to(&mut buf)
            .unwrap();
        buf
    };
    assert_eq!(write(11), write(11));
    assert_ne!(write(11), write(12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ground_state_is_positive_and_normalized(n in 1usize..=10, j in 0.05f64..3.0, h in 0.0f64..3.0) {
        let gs = solve_ground_state(&TfimSpec::new(n, j, h).unwrap()).unwrap();
        let norm: f64 = gs.amplitudes.iter().map(|a| a * a).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        if h > 0.0 {
            prop_assert!(gs.amplitudes.iter().all(|&a| a > 0.0));
        } else {
            prop_assert!(gs.amplitudes.iter().all(|&a| a >= 0.0));
        }
    }

    #[test]
    fn free_fermion_agreement(n in 2usize..=14, h in 0.0f64..2.5) {
        let spec = TfimSpec::new(n, 1.0, h).unwrap();
        let e = solve_ground_state(&spec).unwrap().energy;
        prop_assert!((e - free_fermion_energy(&spec).unwrap()).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn sampler_total_variation(n in 1usize..=6, h in 0.1f64..2.0, seed in any::<u64>()) {
        let gs = solve_ground_state(&TfimSpec::new(n, 1.0, h).unwrap()).unwrap();
        let ds = sample_measurements(&gs, 1_000_000, seed).unwrap();
        let tv = total_variation(&ds.empirical_distribution().unwrap(), &gs.probabilities());
        prop_assert!(tv < 5e-3, "tv = {tv}");
    }
}
