use std::collections::BTreeMap;

use oneclass_core::model::{generate_model, LikableLayout};
use oneclass_core::streams::from_seed;
use oneclass_core::{reward, usercf, AlgoParams, Environment, FeedbackMode, ModelParams, SignedMatrix};
use oneclass_lab::config::Config;
use oneclass_lab::config::ExperimentConfig;
use oneclass_lab::curves::mean_stderr;
use oneclass_lab::experiments::{self, clustered_signed_matrix};
use oneclass_lab::ingest::{self, SelectionConfig, SelectionMode, SignedRating};
use proptest::prelude::*;
use rand::Rng;

/// Dense 50 x 40 random ratings with sparse ids and a few heavy items.
fn random_ratings(seed: u64) -> Vec<SignedRating> {
    let mut rng = from_seed(seed);
    let mut out = Vec::new();
    for u in 0..50u64 {
        for i in 0..40u64 {
            let rate = if i % 7 == 0 { 0.9 } else { 0.4 };
            if rng.gen_bool(rate) {
                let sign = if rng.gen_bool(0.5 + 0.01 * (i % 5) as f64) { 1 } else { -1 };
                out.push(SignedRating { user: 1000 + 3 * u, item: 7 * i + 2, sign });
            }
        }
    }
    out
}

/// Straightforward selection: scan every item, sort with a comparison on
/// exact integer counts.
fn oracle_select(ratings: &[SignedRating], cfg: &SelectionConfig) -> (Vec<u64>, Vec<u64>) {
    let mut per_item: BTreeMap<u64, (i64, i64)> = BTreeMap::new();
    for r in ratings {
        let e = per_item.entry(r.item).or_default();
        if r.sign > 0 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut items: Vec<(u64, i64)> = per_item
        .iter()
        .filter(|(_, &(p, n))| (p + n) as usize >= cfg.min_item_count)
        .filter(|(_, &(p, n))| {
            cfg.mode == SelectionMode::MostRated || ((p - n).abs() as f64) <= cfg.bias_tolerance * (p + n) as f64
        })
        .map(|(&id, &(p, n))| (id, p + n))
        .collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let cols: Vec<u64> = items.iter().take(cfg.n_items_out).map(|x| x.0).collect();
    let mut per_user: BTreeMap<u64, usize> = BTreeMap::new();
    for r in ratings.iter().filter(|r| cols.contains(&r.item)) {
        *per_user.entry(r.user).or_default() += 1;
    }
    let mut users: Vec<(u64, usize)> = per_user.into_iter().collect();
    users.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    (users.iter().take(cfg.n_users_out).map(|x| x.0).collect(), cols)
}

#[test]
fn selection_matches_oracle() {
    for (seed, tol, mode) in [(1, 0.2, SelectionMode::Debiased), (2, 0.35, SelectionMode::Debiased), (3, 0.0, SelectionMode::MostRated)] {
        let ratings = random_ratings(seed);
        let cfg = SelectionConfig { n_users_out: 30, n_items_out: 12, min_item_count: 5, bias_tolerance: tol, mode };
        let got = ingest::select_submatrix(&ratings, &cfg).unwrap();
        let (rows, cols) = oracle_select(&ratings, &cfg);
        assert_eq!(got.row_ids(), rows.as_slice(), "seed {seed}");
        assert_eq!(got.col_ids(), cols.as_slice(), "seed {seed}");
        for (a, &u) in rows.iter().enumerate() {
            for (b, &i) in cols.iter().enumerate() {
                let want = ratings.iter().find(|r| r.user == u && r.item == i).map_or(0, |r| r.sign);
                assert_eq!(got.get(a, b), want);
            }
        }
        let stats = got.stats();
        let cells = (got.n_rows() * got.n_cols()) as f64;
        assert_eq!(stats.positive, got.entries().iter().filter(|&&v| v == 1).count() as f64 / cells);
        assert_eq!(stats.negative, got.entries().iter().filter(|&&v| v == -1).count() as f64 / cells);
    }
}

#[test]
fn selection_reports_a_too_strict_tolerance() {
    let cfg = SelectionConfig { n_users_out: 30, n_items_out: 40, min_item_count: 1, bias_tolerance: 0.0, mode: SelectionMode::Debiased };
    let err = ingest::select_submatrix(&random_ratings(4), &cfg).unwrap_err().to_string();
    assert!(err.contains("bias tolerance"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_round_trips(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let entries: Vec<i8> = (0..rows * cols).map(|_| rng.gen_range(-1..=1)).collect();
        let m = SignedMatrix::new(rows, cols, entries).unwrap();
        let text = ingest::grid_to_string(&m);
        let back = ingest::parse_grid(&text).unwrap();
        prop_assert_eq!(back.entries(), m.entries());
        prop_assert_eq!(ingest::grid_to_string(&back), text);
    }

    #[test]
    fn stderr_shrinks_like_root_n(seed in any::<u64>()) {
        let mut rng = from_seed(seed);
        let draws: Vec<f64> = (0..6400).map(|_| rng.gen::<f64>()).collect();
        let (_, small) = mean_stderr(&draws[..100]);
        let (_, large) = mean_stderr(&draws);
        // 1/sqrt(12 n) for a uniform variable; the ratio of the two is 8.
        let ratio = small / large;
        prop_assert!((ratio - 8.0).abs() < 2.0, "ratio {}", ratio);
    }
}

#[test]
fn acc_reward_is_a_prefix_sum_of_replay_rewards() {
    let corpus = clustered_signed_matrix(40, 30, 3, (0.2, 0.8), 0.85, 5).unwrap();
    for mode in [FeedbackMode::OneClass, FeedbackMode::TwoClass] {
        let env = Environment::replay(corpus.clone(), 0.7, mode, 3).unwrap();
        let mut params = AlgoParams::new(0.5, 0.5, 5, 6);
        params.allow_repeat = false;
        let trace = usercf::run(&env, &params, 30, 4).unwrap();
        let acc = reward::acc_reward(&trace, &env).unwrap();
        let numerators = reward::acc_numerators(&trace, &env).unwrap();
        let mut running = 0i64;
        for t in 0..30 {
            let step: i64 = trace.steps[t].items.iter().enumerate().filter_map(|(u, i)| i.map(|i| corpus.get(u, i) as i64)).sum();
            assert_eq!(numerators[t + 1] - numerators[t], reward::reward_numerator_at(&trace, &env, t).unwrap());
            running += step;
            assert_eq!(numerators[t + 1], running);
            assert_eq!(acc[t + 1], running as f64 / 40.0);
        }
        // without repeats every user has seen every item by T = M
        let total: i64 = (0..40).map(|u| corpus.row_sum(u)).sum();
        assert_eq!(acc[30], total as f64 / 40.0);
    }
}

#[test]
fn one_class_positive_count_scales_with_pf() {
    let corpus = clustered_signed_matrix(60, 50, 2, (0.6, 0.6), 1.0, 9).unwrap();
    let stored: usize = corpus.entries().iter().filter(|&&v| v == 1).count();
    for pf in [1.0, 0.6, 0.25] {
        let mut positives = 0usize;
        let reps = 20;
        for r in 0..reps {
            let env = Environment::replay(corpus.clone(), pf, FeedbackMode::OneClass, r).unwrap();
            let mut params = AlgoParams::new(0.5, 0.5, 5, 6);
            params.allow_repeat = false;
            let trace = usercf::run(&env, &params, 50, 100 + r).unwrap();
            positives += trace.records().filter(|r| r.4 == 1).count();
        }
        let n = (stored * reps as usize) as f64;
        let sigma = (n * pf * (1.0 - pf)).sqrt();
        assert!((positives as f64 - n * pf).abs() <= 3.0 * sigma + 1e-9, "pf {pf}: {positives} of {n}");
    }
}

#[test]
fn late_window_is_nearly_all_likable() {
    // eta = nu/2, eta Q = 25 and M >= T/eta keep preference exploration
    // ahead of exploitation for the whole horizon.
    let mut model = ModelParams::new(200, 3000, 2, 0.5, 0.5, 1.0);
    model.layout = LikableLayout::Disjoint;
    let params = AlgoParams::new(0.57, 0.25, 100, 90);
    let horizon = 700;
    let mut late = Vec::new();
    for seed in 1..=3 {
        let env = Environment::synthetic(generate_model(&model, seed).unwrap(), 1.0, FeedbackMode::OneClass, seed).unwrap();
        let trace = usercf::run(&env, &params, horizon, seed).unwrap();
        let curve = reward::likable_curve(&trace, &env).unwrap();
        let tail = &curve[3 * horizon / 4..];
        late.push(tail.iter().sum::<f64>() / tail.len() as f64);
    }
    let mean = late.iter().sum::<f64>() / late.len() as f64;
    assert!(mean >= 0.95, "{late:?}");
    assert!(late.iter().all(|&v| v >= 0.93), "{late:?}");
}

#[test]
fn experiments_reject_oversized_grids() {
    let mut c = Config::experiment_defaults();
    for (k, v) in [("experiment", "sim-scaling"), ("n_users", "40"), ("n_items", "40"), ("n_types", "2"), ("k_neighbors", "5"), ("replicates", "2")] {
        c.set(k, v).unwrap();
    }
    let cfg = ExperimentConfig::from_config(&c).unwrap();
    let err = format!("{:#}", experiments::run(&cfg).unwrap_err());
    assert!(err.contains("exceed"), "{err}");
}
