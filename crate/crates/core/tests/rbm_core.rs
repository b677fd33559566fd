use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbm_qst::dataset::{index_to_bits, MeasurementDataset};
use rbm_qst::math::total_variation;
use rbm_qst::rbm::{
    cd_gradient, exact_distribution, exact_log_likelihood_gradient, kl_divergence, log_likelihood, sample_model, train,
    ChainConfig, FreezeMask, RbmParams, TrainConfig,
};

fn params_strategy(max_n: usize, max_h: usize, scale: f64) -> impl Strategy<Value = RbmParams> {
    (1..=max_n, 1..=max_h).prop_flat_map(move |(n, nh)| {
        (
            prop::collection::vec(-scale..scale, n * nh),
            prop::collection::vec(-scale..scale, n),
            prop::collection::vec(-scale..scale, nh),
        )
            .prop_map(move |(w, b, c)| RbmParams::from_parts(n, nh, w, b, c).unwrap())
    })
}

fn brute_force_log_marginal(p: &RbmParams, v: &[u8]) -> f64 {
    let terms: Vec<f64> = (0..1usize << p.n_hidden)
        .map(|s| -p.config_energy(v, &index_to_bits(s, p.n_hidden)).unwrap())
        .collect();
    rbm_qst::math::log_sum_exp(&terms)
}

fn small_dataset(n: usize, seed: u64) -> MeasurementDataset {
    let p = RbmParams::random(n, 2, 1.0, seed);
    sample_model(
        &p,
        &ChainConfig {
            n_chains: 4,
            burn_in: 50,
            keep_every: 3,
            n_samples: 40,
        },
        seed,
    )
    .unwrap()
}

#[test]
fn exact_gradient_matches_finite_differences() {
    for n in 1..=4 {
        let mut p = RbmParams::random(n, n, 0.7, n as u64);
        p.visible_bias
            .iter_mut()
            .enumerate()
            .for_each(|(i, b)| *b = 0.3 - 0.2 * i as f64);
        p.hidden_bias
            .iter_mut()
            .enumerate()
            .for_each(|(j, c)| *c = -0.1 + 0.15 * j as f64);
        let ds = small_dataset(n, 10 + n as u64);
        let g = exact_log_likelihood_gradient(&p, &ds).unwrap();
        let analytic: Vec<f64> = g.components().collect();
        let eps = 1e-5;
        let n_params = analytic.len();
        for k in 0..n_params {
            let nudge = |delta: f64| {
                let mut q = p.clone();
                *q.weights
                    .iter_mut()
                    .chain(q.visible_bias.iter_mut())
                    .chain(q.hidden_bias.iter_mut())
                    .nth(k)
                    .unwrap() += delta;
                log_likelihood(&q, &ds).unwrap()
            };
            let fd = (nudge(eps) - nudge(-eps)) / (2.0 * eps);
            assert!((fd - analytic[k]).abs() < 1e-6, "N={n} k={k}: {fd} vs {}", analytic[k]);
        }
    }
}

#[test]
fn gibbs_chain_matches_exact_distribution() {
    let p = RbmParams::random(3, 3, 1.0, 21);
    let exact = exact_distribution(&p).unwrap().probs;
    let cfg = ChainConfig {
        n_chains: 1,
        burn_in: 1000,
        keep_every: 1,
        n_samples: 1_000_000,
    };
    let ds = sample_model(&p, &cfg, 5).unwrap();
    let tv = total_variation(&ds.empirical_distribution().unwrap(), &exact);
    assert!(tv < 1e-2, "tv = {tv}");
}

#[test]
fn cd50_is_unbiased_for_the_exact_gradient() {
    let mut p = RbmParams::random(3, 3, 0.8, 2);
    p.visible_bias = vec![0.4, -0.3, 0.1];
    p.hidden_bias = vec![-0.2, 0.25, 0.0];
    let ds = small_dataset(3, 4);
    let batch: Vec<&[u8]> = ds.shots().collect();
    let exact: Vec<f64> = exact_log_likelihood_gradient(&p, &ds).unwrap().components().collect();
    let draws = 10_000;
    let mut sum = vec![0.0; exact.len()];
    let mut sum_sq = vec![0.0; exact.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..draws {
        let g = cd_gradient(&p, &batch, 50, &mut rng).unwrap();
        for (k, x) in g.components().enumerate() {
            sum[k] += x;
            sum_sq[k] += x * x;
        }
    }
    let d = draws as f64;
    for k in 0..exact.len() {
        let mean = sum[k] / d;
        let var = (sum_sq[k] / d - mean * mean) * d / (d - 1.0);
        let se = (var / d).sqrt();
        assert!(
            (mean - exact[k]).abs() <= 3.0 * se,
            "component {k}: {mean} vs {} (se {se})",
            exact[k]
        );
    }
}

#[test]
fn training_is_deterministic() {
    let ds = small_dataset(5, 9);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 7,
        momentum: 0.5,
        seed: 3,
        ..TrainConfig::default()
    };
    let a = train(cfg.init_params(5, 3, 1), &ds, &cfg).unwrap();
    let b = train(cfg.init_params(5, 3, 1), &ds, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    let c = train(cfg.init_params(5, 3, 1), &ds, &TrainConfig { seed: 4, ..cfg.clone() }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn frozen_weights_stay_bitwise_zero() {
    let ds = small_dataset(4, 2);
    let mut mask = FreezeMask::none(4, 3);
    for k in [0, 5, 11] {
        mask.freeze_flat(k);
    }
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 5,
        learning_rate: 0.1,
        momentum: 0.9,
        freeze_mask: Some(mask.clone()),
        ..TrainConfig::default()
    };
    let out = train(RbmParams::random(4, 3, 1.0, 8), &ds, &cfg).unwrap();
    for k in [0, 5, 11] {
        assert_eq!(out.params.weights[k].to_bits(), 0f64.to_bits());
    }
    assert_eq!(out.params.nonzero_weights(), 9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_energy_equals_hidden_sum(p in params_strategy(6, 12, 2.0), s in any::<u64>()) {
        let v = index_to_bits((s as usize) % (1usize << p.n_visible), p.n_visible);
        let lhs = -p.free_energy(&v);
        let rhs = brute_force_log_marginal(&p, &v);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn amplitude_ratio_chain_rule(p in params_strategy(8, 6, 1.5), a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let n = p.n_visible;
        let pick = |x: u64| index_to_bits((x as usize) % (1usize << n), n);
        let (va, vb, vc) = (pick(a), pick(b), pick(c));
        let lhs = p.amplitude_ratio(&va, &vb) * p.amplitude_ratio(&vb, &vc);
        let rhs = p.amplitude_ratio(&va, &vc);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn distribution_is_normalized(p in params_strategy(8, 5, 3.0)) {
        let s: f64 = exact_distribution(&p).unwrap().probs.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_on_itself(p in params_strategy(6, 4, 2.0), q in params_strategy(6, 4, 2.0)) {
        let target = exact_distribution(&q).unwrap().probs;
        if q.n_visible == p.n_visible {
            prop_assert!(kl_divergence(&target, &p).unwrap() >= 0.0);
        }
        prop_assert!(kl_divergence(&target, &q).unwrap() < 1e-10);
    }

    #[test]
    fn checkpoint_round_trip(p in params_strategy(6, 5, 10.0), frozen in prop::collection::vec(any::<bool>(), 30)) {
        let mut mask = FreezeMask::none(p.n_visible, p.n_hidden);
        for k in 0..p.weights.len() {
            if frozen[k] {
                mask.freeze_flat(k);
            }
        }
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf, Some(&mask)).unwrap();
        let (q, m) = RbmParams::read_checkpoint(&buf[..]).unwrap();
        prop_assert_eq!(q, p);
        prop_assert_eq!(m, Some(mask));
    }
}
