//! The experiments: one-class against two-class on a replayed corpus, the
//! two scaling sweeps, and the synthetic check of the reward guarantee.
//!
//! Replicates run in parallel; each derives all of its randomness from
//! `(root seed, replicate index)` and results are reduced in replicate order,
//! so output does not depend on the number of threads.

use anyhow::{bail, ensure, Context, Result};
use oneclass_core::bounds::{self, BoundsInput};
use oneclass_core::model::{generate_model, non_overlapping_binary};
use oneclass_core::streams::{self, derive_seed, Purpose, StreamRng};
use oneclass_core::{reward, usercf};
use oneclass_core::{
    AlgoParams, AlgoState, EnvKind, Environment, FeedbackMode, PreferenceMatrix, RunTrace, SignedMatrix, StepKind,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::config::{Construction, ExperimentConfig, ExperimentKind};
use crate::curves::CurveTable;
use crate::ingest;

/// A curve table plus `key = value` notes for the metadata sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: CurveTable,
    pub notes: Vec<(String, String)>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(|| match cfg.kind {
        ExperimentKind::OneVsTwo => run_one_vs_two(cfg),
        ExperimentKind::SimScaling => run_sim_scaling(cfg),
        ExperimentKind::PrefScaling => run_pref_scaling(cfg),
        ExperimentKind::SyntheticTheorem => run_synthetic_theorem(cfg),
    })
}

pub fn pf_label(pf: f64) -> String {
    format!("pf={pf}")
}

fn replicate_seed(root: u64, r: usize) -> u64 {
    derive_seed(root, r as u64)
}

/// Runs `f` for every replicate in parallel and returns results in
/// replicate order.
fn replicates<T: Send>(cfg: &ExperimentConfig, f: impl Fn(usize, u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..cfg.replicates).into_par_iter().map(|r| f(r, replicate_seed(cfg.seed, r))).collect()
}

/// A block-structured signed matrix: users fall into `n_clusters` taste
/// clusters round-robin, each item is observed by a user with an
/// item-specific rate drawn from `observe`, and an observed rating agrees
/// with the cluster's taste with probability `agree`.
pub fn clustered_signed_matrix(
    n_users: usize,
    n_items: usize,
    n_clusters: usize,
    observe: (f64, f64),
    agree: f64,
    seed: u64,
) -> Result<SignedMatrix> {
    ensure!(n_clusters >= 1 && n_clusters <= n_users, "need 1 <= clusters <= users");
    ensure!(0.0 <= observe.0 && observe.0 <= observe.1 && observe.1 <= 1.0, "observation rates must satisfy 0 <= min <= max <= 1");
    ensure!((0.0..=1.0).contains(&agree), "agreement must lie in [0, 1]");
    let mut rng = streams::stream(seed, 0, Purpose::Other(0xC1));
    let rates: Vec<f64> = (0..n_items).map(|_| rng.gen_range(observe.0..=observe.1)).collect();
    let taste: Vec<i8> = (0..n_clusters * n_items).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    let mut entries = Vec::with_capacity(n_users * n_items);
    for u in 0..n_users {
        let c = u % n_clusters;
        for i in 0..n_items {
            let observed = rng.gen::<f64>() < rates[i];
            let agrees = rng.gen::<f64>() < agree;
            let s = taste[c * n_items + i];
            entries.push(if !observed { 0 } else if agrees { s } else { -s });
        }
    }
    Ok(SignedMatrix::new(n_users, n_items, entries)?)
}

/// The corpus to replay: the configured grid file, else a synthetic
/// clustered matrix drawn from the root seed.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<SignedMatrix> {
    match &cfg.corpus {
        Some(path) => ingest::read_grid(path),
        None => clustered_signed_matrix(
            cfg.model.n_users,
            cfg.model.n_items,
            cfg.model.n_types,
            cfg.cluster_observe,
            cfg.cluster_agree,
            derive_seed(cfg.seed, u64::MAX),
        ),
    }
}

/// One-class against two-class User-CF on a replayed corpus, without
/// repeated recommendations, up to `T = M`.
pub fn run_one_vs_two(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let corpus = load_corpus(cfg).context("loading the corpus")?;
    let horizon = corpus.n_cols();
    let mut params = cfg.algo.clone();
    params.allow_repeat = false;

    let arms = [
        (FeedbackMode::OneClass, cfg.one_class_pf, "one-class"),
        (FeedbackMode::TwoClass, 1.0, "two-class"),
    ];
    let runs = replicates(cfg, |_, seed| {
        arms.iter()
            .map(|&(mode, pf, _)| {
                let env = Environment::replay(corpus.clone(), pf, mode, seed)?;
                let trace = usercf::run(&env, &params, horizon, seed)?;
                let acc = reward::acc_reward(&trace, &env)?;
                let per_step = (0..horizon).map(|t| reward::reward_at(&trace, &env, t)).collect::<Result<Vec<_>, _>>()?;
                Ok((acc, per_step))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut table = CurveTable::new();
    for (a, &(_, _, name)) in arms.iter().enumerate() {
        for t in 0..=horizon {
            let acc: Vec<f64> = runs.iter().map(|r| r[a].0[t]).collect();
            table.push(&format!("acc {name}"), t as f64, &acc);
        }
        for t in 0..horizon {
            let step: Vec<f64> = runs.iter().map(|r| r[a].1[t]).collect();
            table.push(&format!("reward {name}"), t as f64, &step);
        }
    }
    let stats = corpus.stats();
    let notes = vec![
        ("corpus_rows".into(), corpus.n_rows().to_string()),
        ("corpus_cols".into(), corpus.n_cols().to_string()),
        ("corpus_positive_fraction".into(), stats.positive.to_string()),
        ("corpus_negative_fraction".into(), stats.negative.to_string()),
        ("horizon".into(), horizon.to_string()),
        ("allow_repeat".into(), "false".into()),
        ("two_class_pf".into(), "1".into()),
    ];
    Ok(ExperimentOutput { table, notes })
}

/// What a staged experiment replays against.
enum Source {
    Synthetic,
    Corpus(SignedMatrix),
}

impl Source {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(match &cfg.corpus {
            Some(path) => Source::Corpus(ingest::read_grid(path)?),
            None => Source::Synthetic,
        })
    }

    fn environment(&self, cfg: &ExperimentConfig, pf: f64, seed: u64) -> Result<Environment> {
        Ok(match self {
            Source::Synthetic => {
                let pm = generate_model(&cfg.model, seed)?;
                let env = Environment::synthetic(pm, pf, FeedbackMode::OneClass, seed)?;
                if cfg.fixed_ratings {
                    env.with_fixed_realization()?
                } else {
                    env
                }
            }
            Source::Corpus(m) => Environment::replay(m.clone(), pf, FeedbackMode::OneClass, seed)?,
        })
    }
}

/// Value of recommending `item` to `user`: likability for synthetic
/// environments, the stored rating for replayed ones.
fn score(env: &Environment, user: usize, item: Option<usize>) -> f64 {
    let Some(i) = item else { return 0.0 };
    match env.kind() {
        EnvKind::Synthetic(pm) => pm.is_likable(user, i) as u8 as f64,
        EnvKind::Replay(m) => m.get(user, i) as f64,
    }
}

/// State and randomness of one staged replicate.
///
/// Responses of user `u` in phase `p` come from their own stream, so two
/// runs that differ only in `pf` share hidden ratings and reveal coins
/// (common random numbers).
struct Staged {
    env: Environment,
    state: AlgoState,
    params: AlgoParams,
    /// `I_1` in the fixed order similarity steps walk it.
    first_half: Vec<usize>,
    /// Membership mask of `I_2`.
    second_mask: Vec<bool>,
    /// Per user, a random order of `I_2` for preference steps.
    second_orders: Vec<Vec<usize>>,
    seed: u64,
    exploit_rng: StreamRng,
}

impl Staged {
    fn new(cfg: &ExperimentConfig, source: &Source, pf: f64, seed: u64) -> Result<Self> {
        let env = source.environment(cfg, pf, seed)?;
        let (n, m) = (env.n_users(), env.n_items());
        ensure!(cfg.algo.k_neighbors < n, "k = {} needs more than {n} users", cfg.algo.k_neighbors);
        let mut rng = streams::stream(seed, 0, Purpose::Experiment);
        let mut items: Vec<usize> = (0..m).collect();
        items.shuffle(&mut rng);
        let first_half = items[..m / 2].to_vec();
        let second: Vec<usize> = items[m / 2..].to_vec();
        let mut second_mask = vec![false; m];
        for &i in &second {
            second_mask[i] = true;
        }
        let second_orders = (0..n)
            .map(|u| {
                let mut r = streams::stream(seed, 1 + u as u64, Purpose::Experiment);
                let mut order = second.clone();
                order.shuffle(&mut r);
                order
            })
            .collect();
        let mut params = cfg.algo.clone();
        params.feedback = FeedbackMode::OneClass;
        let state = AlgoState::with_layout(n, m, FeedbackMode::OneClass, items, vec![(0..m).collect()]);
        Ok(Self {
            env,
            state,
            params,
            first_half,
            second_mask,
            second_orders,
            seed,
            exploit_rng: streams::stream(seed, u64::MAX, Purpose::Experiment),
        })
    }

    fn response_streams(&self, phase: u64) -> Vec<StreamRng> {
        (0..self.env.n_users())
            .map(|u| streams::stream(derive_seed(self.seed, phase), u as u64, Purpose::Environment))
            .collect()
    }

    /// Recommends the `j`-th item of `I_1` to every user.
    fn similarity_step(&mut self, j: usize, rngs: &mut [StreamRng]) {
        let i = self.first_half[j];
        for (u, rng) in rngs.iter_mut().enumerate() {
            let r = self.env.sample_response(u, i, rng);
            self.state.record(StepKind::Similarity, u, i, r);
        }
        self.state.advance();
    }

    /// Recommends the `j`-th item of each user's random order of `I_2`.
    fn preference_step(&mut self, j: usize, rngs: &mut [StreamRng]) {
        for (u, rng) in rngs.iter_mut().enumerate() {
            let i = self.second_orders[u][j];
            let r = self.env.sample_response(u, i, rng);
            self.state.record(StepKind::Preference, u, i, r);
        }
        self.state.advance();
    }

    /// Mean value of one exploitation step restricted to `I_2`, evaluated
    /// without changing the state.
    fn exploit_value(&mut self) -> f64 {
        let recs = self.state.exploit_within(&self.params, Some(&self.second_mask), &mut self.exploit_rng);
        let n = self.env.n_users();
        recs.items.iter().enumerate().map(|(u, &i)| score(&self.env, u, i)).sum::<f64>() / n as f64
    }
}

fn scaled_steps(base: f64, pf: f64, power: i32) -> usize {
    (base / pf.powi(power)).round() as usize
}

/// Random `I_2` preference steps, then a sweep of similarity steps over
/// `I_1`, evaluating one exploitation step at every grid point.
/// The x axis is `T_s pf^2`.
pub fn run_sim_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let source = Source::new(cfg)?;
    let mut ts_grid = cfg.ts_grid.clone();
    ts_grid.sort_unstable();
    ts_grid.dedup();

    let mut table = CurveTable::new();
    let mut notes = vec![
        ("x_axis".into(), "similarity steps times pf^2".into()),
        ("exploit_steps_after_staging".into(), "1, restricted to the second item half".into()),
    ];
    for &pf in &cfg.pf {
        let steps: Vec<usize> = ts_grid.iter().map(|&t| scaled_steps(t as f64, pf, 2)).collect();
        let runs = replicates(cfg, |_, seed| {
            let mut s = Staged::new(cfg, &source, pf, seed)?;
            let m = s.env.n_items();
            let n_pref = (cfg.pref_warmup * m as f64 / (cfg.algo.k_neighbors as f64 * pf)).round() as usize;
            if n_pref > m - m / 2 {
                bail!("{n_pref} warm-up preference steps exceed the {} items of the second half", m - m / 2);
            }
            if let Some(&last) = steps.last() {
                ensure!(last <= m / 2, "{last} similarity steps exceed the {} items of the first half", m / 2);
            }
            let mut pref_rngs = s.response_streams(1);
            for j in 0..n_pref {
                s.preference_step(j, &mut pref_rngs);
            }
            let mut sim_rngs = s.response_streams(2);
            let mut done = 0;
            let mut values = Vec::with_capacity(steps.len());
            for &target in &steps {
                while done < target {
                    s.similarity_step(done, &mut sim_rngs);
                    done += 1;
                }
                values.push(s.exploit_value());
            }
            Ok(values)
        })?;
        for (g, &t_s) in steps.iter().enumerate() {
            let samples: Vec<f64> = runs.iter().map(|r| r[g]).collect();
            table.push(&pf_label(pf), t_s as f64 * pf * pf, &samples);
        }
        notes.push((format!("similarity_steps {}", pf_label(pf)), join(&steps)));
    }
    Ok(ExperimentOutput { table, notes })
}

/// `sim_warmup / pf^2` similarity steps over `I_1`, then a sweep of random
/// `I_2` preference steps, evaluating one exploitation step at every grid
/// point. The x axis is `T_r pf`.
pub fn run_pref_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let source = Source::new(cfg)?;
    let mut tr_grid = cfg.tr_grid.clone();
    tr_grid.sort_unstable();
    tr_grid.dedup();

    let mut table = CurveTable::new();
    let mut notes = vec![
        ("x_axis".into(), "preference steps times pf".into()),
        ("exploit_steps_after_staging".into(), "1, restricted to the second item half".into()),
    ];
    for &pf in &cfg.pf {
        let steps: Vec<usize> = tr_grid.iter().map(|&t| scaled_steps(t as f64, pf, 1)).collect();
        let warmup = scaled_steps(cfg.sim_warmup, pf, 2);
        let runs = replicates(cfg, |_, seed| {
            let mut s = Staged::new(cfg, &source, pf, seed)?;
            let m = s.env.n_items();
            ensure!(warmup <= m / 2, "{warmup} similarity steps exceed the {} items of the first half", m / 2);
            if let Some(&last) = steps.last() {
                ensure!(last <= m - m / 2, "{last} preference steps exceed the {} items of the second half", m - m / 2);
            }
            let mut sim_rngs = s.response_streams(2);
            for j in 0..warmup {
                s.similarity_step(j, &mut sim_rngs);
            }
            let mut pref_rngs = s.response_streams(1);
            let mut done = 0;
            let mut values = Vec::with_capacity(steps.len());
            for &target in &steps {
                while done < target {
                    s.preference_step(done, &mut pref_rngs);
                    done += 1;
                }
                values.push(s.exploit_value());
            }
            Ok(values)
        })?;
        for (g, &t_r) in steps.iter().enumerate() {
            let samples: Vec<f64> = runs.iter().map(|r| r[g]).collect();
            table.push(&pf_label(pf), t_r as f64 * pf, &samples);
        }
        notes.push((format!("similarity_warmup {}", pf_label(pf)), warmup.to_string()));
        notes.push((format!("preference_steps {}", pf_label(pf)), join(&steps)));
    }
    Ok(ExperimentOutput { table, notes })
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// The model of one synthetic replicate.
pub fn synthetic_model(cfg: &ExperimentConfig, pf: f64, seed: u64) -> Result<PreferenceMatrix> {
    Ok(match cfg.construction {
        Construction::Bands => {
            let mut params = cfg.model.clone();
            params.pf = pf;
            generate_model(&params, seed)?
        }
        Construction::NonOverlapping => non_overlapping_binary(cfg.model.n_users, cfg.model.n_types, pf, seed)?,
    })
}

/// Algorithm parameters, replaced by the recommended triple when asked to.
pub fn algo_params(cfg: &ExperimentConfig, pf: f64) -> AlgoParams {
    let mut params = cfg.algo.clone();
    if cfg.recommended {
        let rec = bounds::recommended_params(&cfg.bounds_input(pf, 0.0));
        params.eta = rec.eta;
        params.k_neighbors = rec.k_neighbors;
        params.batch_size = rec.batch_size;
    }
    params
}

/// Generates a model, runs User-CF on it and returns the trace.
pub fn run_synthetic_once(cfg: &ExperimentConfig, pf: f64, seed: u64) -> Result<(Environment, RunTrace)> {
    let pm = synthetic_model(cfg, pf, seed)?;
    let mut env = Environment::synthetic(pm, pf, FeedbackMode::OneClass, seed)?;
    if cfg.fixed_ratings {
        env = env.with_fixed_realization()?;
    }
    let trace = usercf::run(&env, &algo_params(cfg, pf), cfg.horizon, seed)?;
    Ok((env, trace))
}

/// Likable fraction per step and cumulatively, with the reward bound and the
/// cold-start time overlaid.
pub fn run_synthetic_theorem(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut table = CurveTable::new();
    let mut notes = Vec::new();
    for &pf in &cfg.pf {
        let label = pf_label(pf);
        let runs = replicates(cfg, |_, seed| {
            let (env, trace) = run_synthetic_once(cfg, pf, seed)?;
            let gamma = match env.kind() {
                EnvKind::Synthetic(pm) => pm.achieved_gamma(),
                EnvKind::Replay(_) => unreachable!("synthetic runs use synthetic environments"),
            };
            Ok((reward::likable_curve(&trace, &env)?, gamma))
        })?;
        let horizon = cfg.horizon;
        let mut cumulative: Vec<Vec<f64>> = vec![Vec::with_capacity(runs.len()); horizon];
        for (curve, _) in &runs {
            let mut acc = 0.0;
            for (t, v) in curve.iter().enumerate() {
                acc += v;
                cumulative[t].push(acc / (t + 1) as f64);
            }
        }
        for t in 0..horizon {
            let per_step: Vec<f64> = runs.iter().map(|(c, _)| c[t]).collect();
            table.push(&format!("likable {label}"), (t + 1) as f64, &per_step);
            table.push(&format!("cumulative {label}"), (t + 1) as f64, &cumulative[t]);
        }

        let gamma = runs.iter().map(|(_, g)| *g).fold(0.0, f64::max);
        let params = algo_params(cfg, pf);
        let input = BoundsInput {
            eta: params.eta,
            batch_size: params.batch_size,
            k_neighbors: params.k_neighbors,
            ..cfg.bounds_input(pf, gamma)
        };
        let flags = bounds::condition_flags(&input);
        notes.push((format!("gamma {label}"), gamma.to_string()));
        for (name, ok) in flags.named() {
            notes.push((format!("flag {name} {label}"), ok.to_string()));
        }
        if !flags.all() {
            let failing: Vec<&str> = flags.named().iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
            log::warn!("{label}: the reward guarantee does not apply, failing conditions: {}", failing.join(", "));
        }
        match bounds::t_start(&input) {
            Ok(ts) => {
                notes.push((format!("t_start {label}"), ts.to_string()));
                table.push(&format!("t_start {label}"), ts, &[0.0]);
                for t in 1..=horizon {
                    if t as f64 >= ts {
                        let lb = bounds::reward_lower_bound(&BoundsInput { horizon: t as u64, ..input.clone() })?;
                        table.push(&format!("lower-bound {label}"), t as f64, &[lb]);
                    }
                }
                if ts > horizon as f64 {
                    log::warn!("{label}: cold-start time {ts:.4e} lies beyond the horizon {horizon}");
                }
            }
            Err(e) => {
                log::warn!("{label}: no cold-start time: {e}");
                notes.push((format!("t_start {label}"), format!("undefined: {e}")));
            }
        }
        if let Ok((bound, until)) = bounds::prop1_bound(&input) {
            notes.push((format!("prop1_bound {label}"), bound.to_string()));
            notes.push((format!("prop1_horizon {label}"), until.to_string()));
        }
    }
    Ok(ExperimentOutput { table, notes })
}
