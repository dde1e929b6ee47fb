use oneclass_core::model::{check_separation, generate_model, LikableLayout};
use oneclass_core::streams::from_seed;
use oneclass_core::{Environment, FeedbackMode, ModelParams, PreferenceMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Does `gamma` satisfy the separation condition for every user? Inner
/// products are recomputed from scratch for every pair.
fn separates(pm: &PreferenceMatrix, gamma: f64) -> bool {
    let n = pm.n_users();
    (0..n).all(|u| {
        (0..n).filter(|&v| pm.type_of()[v] != pm.type_of()[u]).all(|v| {
            let across = dot(pm.row(u), pm.row(v));
            (0..n)
                .filter(|&w| pm.type_of()[w] == pm.type_of()[u])
                .all(|w| across <= gamma * dot(pm.row(u), pm.row(w)))
        })
    })
}

#[test]
fn gamma_matches_bisection_oracle() {
    for seed in 0..5 {
        let pm = generate_model(&ModelParams::new(12, 30, 3, 0.2, 0.4, 1.0), seed).unwrap();
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if separates(&pm, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let gamma = check_separation(&pm).unwrap();
        assert!((gamma - hi).abs() <= 1e-9 * hi.max(1.0), "seed {seed}: {gamma} vs {hi}");
        assert_eq!(gamma, pm.achieved_gamma());
    }
}

#[test]
fn gamma_unchanged_under_user_permutation() {
    for seed in 0..5 {
        let pm = generate_model(&ModelParams::new(20, 40, 4, 0.25, 0.3, 0.5), seed).unwrap();
        let mut order: Vec<usize> = (0..20).collect();
        order.shuffle(&mut from_seed(seed));
        let probs: Vec<f64> = order.iter().flat_map(|&u| pm.row(u).to_vec()).collect();
        let types: Vec<usize> = order.iter().map(|&u| pm.type_of()[u]).collect();
        let permuted = PreferenceMatrix::from_parts(40, 4, probs, types, 0.25, 0.3, 0.5).unwrap();
        let a = pm.achieved_gamma();
        let b = permuted.achieved_gamma();
        assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn exhaustive_gap_scan() {
    let pm = generate_model(&ModelParams::new(60, 120, 3, 0.3, 0.25, 1.0), 7).unwrap();
    assert_eq!(pm.probs().len(), 7200);
    assert!(pm.probs().iter().all(|&p| !(p > 0.2 && p < 0.8)));
}

#[test]
fn generation_and_responses_are_deterministic() {
    let params = ModelParams::new(30, 50, 3, 0.2, 0.3, 0.7);
    let a = generate_model(&params, 42).unwrap();
    let b = generate_model(&params, 42).unwrap();
    assert_eq!(a, b);
    let bits = |pm: &PreferenceMatrix| pm.probs().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(a, generate_model(&params, 43).unwrap());

    let env_a = Environment::synthetic(a, 0.7, FeedbackMode::OneClass, 9).unwrap();
    let env_b = Environment::synthetic(b, 0.7, FeedbackMode::OneClass, 9).unwrap();
    let (mut ra, mut rb) = (env_a.response_stream(), env_b.response_stream());
    for u in 0..30 {
        for i in 0..50 {
            assert_eq!(env_a.sample_response(u, i, &mut ra), env_b.sample_response(u, i, &mut rb));
        }
    }
}

#[test]
fn one_class_rate_over_many_cells() {
    let pm = generate_model(&ModelParams::new(4, 6, 2, 0.1, 0.5, 0.6), 3).unwrap();
    let env = Environment::synthetic(pm.clone(), 0.6, FeedbackMode::OneClass, 1).unwrap();
    let mut rng = env.response_stream();
    let draws = 50_000u32;
    for u in 0..4 {
        for i in 0..6 {
            let p = pm.prob(u, i) * 0.6;
            let hits = (0..draws).filter(|_| env.sample_response(u, i, &mut rng) == 1).count();
            let rate = hits as f64 / draws as f64;
            let bound = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
            assert!((rate - p).abs() <= bound.max(1e-12), "({u}, {i}): {rate} vs {p}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_matrices_satisfy_invariants(seed in any::<u64>(), n in 2usize..40, m in 2usize..60,
                                             k_frac in 0.0f64..1.0, delta in 0.01f64..0.5, nu in 0.0f64..1.0,
                                             disjoint in any::<bool>()) {
        let k = 1 + ((n.min(m) - 1) as f64 * k_frac) as usize;
        let nu = (1.0 / m as f64).max(nu);
        let mut params = ModelParams::new(n, m, k, delta, nu, 1.0);
        if disjoint {
            params.layout = LikableLayout::Disjoint;
            prop_assume!(k * params.likable_count() <= m);
        }
        match generate_model(&params, seed) {
            Ok(pm) => {
                prop_assert!(pm.validate().is_ok());
                let sizes = pm.type_sizes();
                prop_assert!(sizes.iter().all(|&s| s >= n / k));
                for u in 0..n {
                    let liked = (0..m).filter(|&i| pm.is_likable(u, i)).count();
                    prop_assert_eq!(liked, params.likable_count());
                }
            }
            // Random layouts can put a zero inner product inside a type only
            // with exact zeros in the bands; that is reported, never hidden.
            Err(e) => prop_assert!(matches!(e, oneclass_core::ModelError::DegenerateSeparation { .. }), "{e}"),
        }
    }
}
