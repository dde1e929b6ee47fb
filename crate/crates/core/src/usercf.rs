//! The online User-CF recommender.
//!
//! At every time step each user receives one item. Steps come in three
//! kinds:
//!
//! * **preference exploration** at `t = floor(eta Q q)`: each user gets a
//!   uniformly random unrated item of batch `Q_q`;
//! * **similarity exploration** (probability `(t - q)^-alpha`, with
//!   `q = floor(t / (eta Q))`): every user gets the first item of a fixed
//!   random permutation that they have not been recommended yet;
//! * **exploitation**: each user gets the unrated item maximizing the
//!   neighbor average `p_hat`, where neighbors are the `k` users with the
//!   largest inner product of similarity-step responses.
//!
//! Recommendations for a step are computed from the state frozen at the end
//! of the previous step ([`AlgoState::similarity_explore`],
//! [`AlgoState::preference_explore`], [`AlgoState::exploit`] only borrow the
//! state) and then applied in one batch with [`AlgoState::commit`]. The same
//! two calls make up the scripted driver used by staged experiments.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{Environment, FeedbackMode};
use crate::streams::{self, Purpose};
use crate::trace::{RunTrace, StepRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgoError {
    #[error("invalid algorithm parameters: {0}")]
    Params(&'static str),
    #[error("batch size {batch_size} exceeds the number of items {n_items}")]
    BatchTooLarge { batch_size: usize, n_items: usize },
    #[error("k = {k} neighbors requested but only {others} other users exist")]
    TooManyNeighbors { k: usize, others: usize },
    #[error("batch {q} out of range ({n_batches} batches)")]
    BatchIndex { q: usize, n_batches: usize },
    #[error("environment is {env_users}x{env_items}, state is {users}x{items}")]
    Shape { env_users: usize, env_items: usize, users: usize, items: usize },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoParams {
    /// Similarity learning rate, in `(0, 4/7)`.
    pub alpha: f64,
    /// Preference exploration rate, in `(0, 1)`.
    pub eta: f64,
    /// Batch size `Q`.
    pub batch_size: usize,
    /// Neighborhood size `k`.
    pub k_neighbors: usize,
    pub feedback: FeedbackMode,
    /// Allow re-recommending items that were recommended but not rated.
    pub allow_repeat: bool,
    /// Draw a uniform candidate when every estimate is zero.
    pub random_on_cold: bool,
    /// Similarity steps skip only rated items instead of every recommended one.
    pub sim_skip_rated_only: bool,
}

impl AlgoParams {
    pub fn new(alpha: f64, eta: f64, batch_size: usize, k_neighbors: usize) -> Self {
        Self {
            alpha,
            eta,
            batch_size,
            k_neighbors,
            feedback: FeedbackMode::OneClass,
            allow_repeat: true,
            random_on_cold: false,
            sim_skip_rated_only: false,
        }
    }

    pub fn eta_q(&self) -> f64 {
        self.eta * self.batch_size as f64
    }

    pub fn validate(&self) -> Result<(), AlgoError> {
        if !(self.alpha > 0.0 && self.alpha < 4.0 / 7.0) {
            return Err(AlgoError::Params("alpha must lie in (0, 4/7)"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(AlgoError::Params("eta must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.k_neighbors == 0 {
            return Err(AlgoError::Params("Q and k must be positive"));
        }
        if self.eta_q() < 2.0 {
            return Err(AlgoError::Params("eta * Q must be at least 2"));
        }
        Ok(())
    }
}

/// The kind of a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepType {
    Preference(usize),
    Similarity,
    Exploit,
}

impl StepType {
    pub fn kind(self) -> StepKind {
        match self {
            StepType::Preference(_) => StepKind::Preference,
            StepType::Similarity => StepKind::Similarity,
            StepType::Exploit => StepKind::Exploit,
        }
    }

    pub fn name(self) -> &'static str {
        self.kind().name()
    }
}

/// A step type without the batch index, used when committing responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Preference,
    Similarity,
    Exploit,
}

impl StepKind {
    pub fn name(self) -> &'static str {
        match self {
            StepKind::Preference => "preference",
            StepKind::Similarity => "similarity",
            StepKind::Exploit => "exploit",
        }
    }
}

/// Returns the batch `q` if `t = floor(eta_q * q)` for some `q < n_batches`.
pub fn preference_batch(t: usize, eta_q: f64, n_batches: usize) -> Option<usize> {
    let approx = (t as f64 / eta_q) as usize;
    let lo = approx.saturating_sub(1);
    (lo..=approx + 1).find(|&q| q < n_batches && libm::floor(eta_q * q as f64) as usize == t)
}

/// Probability `(t - q)^-alpha`, `q = floor(t / eta_q)`, of a similarity step
/// at a non-preference time `t`. `None` when `t - q <= 0`.
pub fn similarity_probability(t: usize, alpha: f64, eta_q: f64) -> Option<f64> {
    let q = libm::floor(t as f64 / eta_q);
    let gap = t as f64 - q;
    if gap <= 0.0 {
        return None;
    }
    Some(libm::pow(gap, -alpha))
}

/// Draws the step type at time `t`.
///
/// # Panics
///
/// If `t` is neither a preference time nor has `t - q > 0`; unreachable when
/// `eta Q >= 2`.
pub fn step_type<R: Rng + ?Sized>(t: usize, params: &AlgoParams, n_batches: usize, rng: &mut R) -> StepType {
    let eta_q = params.eta_q();
    if let Some(q) = preference_batch(t, eta_q, n_batches) {
        return StepType::Preference(q);
    }
    let p_sim = similarity_probability(t, params.alpha, eta_q).expect("schedule requires t - q > 0 when eta Q >= 2");
    if rng.gen::<f64>() < p_sim {
        StepType::Similarity
    } else {
        StepType::Exploit
    }
}

/// Items chosen for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recommendations {
    /// `None` marks a user with nothing left to recommend.
    pub items: Vec<Option<usize>>,
    /// Users served by a fallback rule.
    pub fallbacks: u32,
}

/// Mutable state of the recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoState {
    n_users: usize,
    n_items: usize,
    feedback: FeedbackMode,
    perm: Vec<usize>,
    batches: Vec<Vec<usize>>,
    sim_responses: Vec<i8>,
    all_responses: Vec<i8>,
    recommended: Vec<bool>,
    rated: Vec<bool>,
    /// Distinct recommended items per user, in first-recommendation order.
    history: Vec<Vec<usize>>,
    /// Inner products of similarity response vectors, `N x N`.
    gram: Vec<i64>,
    /// Position in `perm` before which every item was recommended.
    sim_cursor: Vec<usize>,
    t: usize,
}

impl AlgoState {
    /// Fresh state with a uniform permutation and a uniform partition of the
    /// items into `ceil(M / Q)` batches (the last one possibly smaller).
    pub fn init<R: Rng + ?Sized>(
        params: &AlgoParams,
        n_users: usize,
        n_items: usize,
        rng: &mut R,
    ) -> Result<Self, AlgoError> {
        params.validate()?;
        if params.batch_size > n_items {
            return Err(AlgoError::BatchTooLarge { batch_size: params.batch_size, n_items });
        }
        if params.k_neighbors + 1 > n_users {
            return Err(AlgoError::TooManyNeighbors { k: params.k_neighbors, others: n_users.saturating_sub(1) });
        }
        let mut perm: Vec<usize> = (0..n_items).collect();
        perm.shuffle(rng);
        let mut shuffled: Vec<usize> = (0..n_items).collect();
        shuffled.shuffle(rng);
        let batches = shuffled.chunks(params.batch_size).map(|c| c.to_vec()).collect();
        Ok(Self::with_layout(n_users, n_items, params.feedback, perm, batches))
    }

    /// State with an explicit permutation and batch partition and no history.
    pub fn with_layout(
        n_users: usize,
        n_items: usize,
        feedback: FeedbackMode,
        perm: Vec<usize>,
        batches: Vec<Vec<usize>>,
    ) -> Self {
        assert_eq!(perm.len(), n_items, "permutation must cover every item");
        Self {
            n_users,
            n_items,
            feedback,
            perm,
            batches,
            sim_responses: vec![0; n_users * n_items],
            all_responses: vec![0; n_users * n_items],
            recommended: vec![false; n_users * n_items],
            rated: vec![false; n_users * n_items],
            history: vec![Vec::new(); n_users],
            gram: vec![0; n_users * n_users],
            sim_cursor: vec![0; n_users],
            t: 0,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn feedback(&self) -> FeedbackMode {
        self.feedback
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn advance(&mut self) {
        self.t += 1;
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    #[inline]
    fn idx(&self, user: usize, item: usize) -> usize {
        user * self.n_items + item
    }

    pub fn sim_response(&self, user: usize, item: usize) -> i8 {
        self.sim_responses[self.idx(user, item)]
    }

    /// Latest informative response `o_ui` (0 if none).
    pub fn response(&self, user: usize, item: usize) -> i8 {
        self.all_responses[self.idx(user, item)]
    }

    pub fn is_recommended(&self, user: usize, item: usize) -> bool {
        self.recommended[self.idx(user, item)]
    }

    pub fn is_rated(&self, user: usize, item: usize) -> bool {
        self.rated[self.idx(user, item)]
    }

    pub fn history(&self, user: usize) -> &[usize] {
        &self.history[user]
    }

    /// `<r_sim_u, r_sim_v>`.
    pub fn similarity(&self, u: usize, v: usize) -> i64 {
        self.gram[u * self.n_users + v]
    }

    fn allowed(&self, params: &AlgoParams, user: usize, item: usize) -> bool {
        let at = self.idx(user, item);
        !self.rated[at] && (params.allow_repeat || !self.recommended[at])
    }

    /// Item for each user in a similarity step.
    ///
    /// The first item in permutation order not yet recommended to the user
    /// (in any step kind). Once the permutation is used up the first unrated
    /// item in permutation order is taken instead, counted as a fallback.
    pub fn similarity_explore(&self, params: &AlgoParams) -> Recommendations {
        let mut fallbacks = 0;
        let items = (0..self.n_users)
            .map(|u| {
                let primary = if params.sim_skip_rated_only {
                    self.perm.iter().copied().find(|&i| self.allowed(params, u, i))
                } else {
                    self.perm[self.sim_cursor[u]..].iter().copied().find(|&i| !self.is_recommended(u, i))
                };
                primary.or_else(|| {
                    let fallback = self.perm.iter().copied().find(|&i| self.allowed(params, u, i));
                    if fallback.is_some() {
                        fallbacks += 1;
                        log::debug!("user {u}: permutation exhausted, similarity fallback");
                    }
                    fallback
                })
            })
            .collect();
        Recommendations { items, fallbacks }
    }

    /// Item for each user in preference step `q`: uniform over the unrated
    /// items of batch `q`, falling back to all unrated items.
    pub fn preference_explore<R: Rng + ?Sized>(
        &self,
        params: &AlgoParams,
        q: usize,
        rng: &mut R,
    ) -> Result<Recommendations, AlgoError> {
        let batch = self
            .batches
            .get(q)
            .ok_or(AlgoError::BatchIndex { q, n_batches: self.batches.len() })?;
        let mut fallbacks = 0;
        let mut candidates = Vec::with_capacity(self.n_items);
        let items = (0..self.n_users)
            .map(|u| {
                candidates.clear();
                candidates.extend(batch.iter().copied().filter(|&i| self.allowed(params, u, i)));
                if candidates.is_empty() {
                    candidates.extend((0..self.n_items).filter(|&i| self.allowed(params, u, i)));
                    if !candidates.is_empty() {
                        fallbacks += 1;
                        log::debug!("user {u}: batch {q} exhausted, preference fallback");
                    }
                }
                candidates.choose(rng).copied()
            })
            .collect();
        Ok(Recommendations { items, fallbacks })
    }

    /// The `k` users `v != u` with the largest similarity to `u`, ties broken
    /// by ascending index.
    pub fn nearest_neighbors(&self, u: usize, k: usize) -> Vec<usize> {
        let row = &self.gram[u * self.n_users..(u + 1) * self.n_users];
        let mut others: Vec<usize> = (0..self.n_users).filter(|&v| v != u).collect();
        let k = k.min(others.len());
        let order = |a: &usize, b: &usize| row[*b].cmp(&row[*a]).then(a.cmp(b));
        if k < others.len() && k > 0 {
            others.select_nth_unstable_by(k - 1, order);
        }
        others.truncate(k);
        others.sort_unstable_by(order);
        others
    }

    /// `p_hat_ui = (1 / n_ui) sum_{v in N_u} o_vi`, with `n_ui` the number of
    /// neighbors ever recommended `i`; zero when `n_ui = 0`.
    pub fn estimate_p_hat(&self, item: usize, neighbors: &[usize]) -> f64 {
        let mut count = 0i64;
        let mut sum = 0i64;
        for &v in neighbors {
            let at = self.idx(v, item);
            if self.recommended[at] {
                count += 1;
                sum += self.all_responses[at] as i64;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum as f64 / count as f64
        }
    }

    /// Item for each user in an exploitation step.
    pub fn exploit<R: Rng + ?Sized>(&self, params: &AlgoParams, rng: &mut R) -> Recommendations {
        self.exploit_within(params, None, rng)
    }

    /// Exploitation restricted to the items flagged in `pool`.
    pub fn exploit_within<R: Rng + ?Sized>(
        &self,
        params: &AlgoParams,
        pool: Option<&[bool]>,
        rng: &mut R,
    ) -> Recommendations {
        let mut scratch = ExploitScratch::new(self.n_items);
        let items = (0..self.n_users)
            .map(|u| self.exploit_user(params, u, pool, &mut scratch, rng))
            .collect();
        Recommendations { items, fallbacks: 0 }
    }

    fn exploit_user<R: Rng + ?Sized>(
        &self,
        params: &AlgoParams,
        u: usize,
        pool: Option<&[bool]>,
        scratch: &mut ExploitScratch,
        rng: &mut R,
    ) -> Option<usize> {
        let neighbors = self.nearest_neighbors(u, params.k_neighbors);
        scratch.reset();
        for &v in &neighbors {
            for &i in &self.history[v] {
                if scratch.count[i] == 0 {
                    scratch.touched.push(i);
                }
                scratch.count[i] += 1;
                scratch.sum[i] += self.all_responses[self.idx(v, i)] as i64;
            }
        }

        let mut best: Option<(usize, f64)> = None;
        let mut any_nonzero = false;
        let mut n_candidates = 0usize;
        for i in 0..self.n_items {
            if !self.allowed(params, u, i) || pool.is_some_and(|p| !p[i]) {
                continue;
            }
            n_candidates += 1;
            let c = scratch.count[i];
            let p_hat = if c == 0 { 0.0 } else { scratch.sum[i] as f64 / c as f64 };
            any_nonzero |= p_hat != 0.0;
            if best.is_none_or(|(_, b)| p_hat > b) {
                best = Some((i, p_hat));
            }
        }
        if params.random_on_cold && !any_nonzero && n_candidates > 0 {
            let pick = rng.gen_range(0..n_candidates);
            return (0..self.n_items)
                .filter(|&i| self.allowed(params, u, i) && pool.is_none_or(|p| p[i]))
                .nth(pick);
        }
        best.map(|(i, _)| i)
    }

    /// Applies one step's recommendations and responses.
    ///
    /// Marks items recommended, stores informative (non-zero) responses,
    /// marks them rated, and for similarity steps also records them in the
    /// similarity vectors.
    pub fn commit(&mut self, kind: StepKind, items: &[Option<usize>], responses: &[i8]) {
        assert_eq!(items.len(), self.n_users);
        assert_eq!(responses.len(), self.n_users);
        for (u, (item, &r)) in items.iter().zip(responses).enumerate() {
            let Some(i) = *item else { continue };
            self.record(kind, u, i, r);
        }
    }

    /// Applies a single `(user, item, response)` event.
    pub fn record(&mut self, kind: StepKind, u: usize, i: usize, response: i8) {
        let r = match self.feedback {
            FeedbackMode::OneClass => (response == 1) as i8,
            FeedbackMode::TwoClass => response.signum(),
        };
        let at = self.idx(u, i);
        if !self.recommended[at] {
            self.recommended[at] = true;
            self.history[u].push(i);
        }
        if r != 0 {
            self.all_responses[at] = r;
            self.rated[at] = true;
            if kind == StepKind::Similarity {
                let old = self.sim_responses[at];
                if old != r {
                    self.sim_responses[at] = r;
                    self.update_gram(u, i, (r - old) as i64);
                }
            }
        }
        while self.sim_cursor[u] < self.n_items && self.recommended[self.idx(u, self.perm[self.sim_cursor[u]])] {
            self.sim_cursor[u] += 1;
        }
    }

    fn update_gram(&mut self, u: usize, i: usize, change: i64) {
        let n = self.n_users;
        for v in 0..n {
            let s = self.sim_responses[v * self.n_items + i] as i64;
            if s == 0 {
                continue;
            }
            if v == u {
                // sim[u][i] already holds the new value s: s^2 - old^2.
                let old = s - change;
                self.gram[u * n + u] += s * s - old * old;
            } else {
                self.gram[u * n + v] += change * s;
                self.gram[v * n + u] += change * s;
            }
        }
    }

    /// Rebuilds the similarity Gram matrix from scratch.
    pub fn recompute_similarity(&mut self) {
        let n = self.n_users;
        let m = self.n_items;
        for u in 0..n {
            for v in u..n {
                let ip: i64 = (0..m)
                    .map(|i| self.sim_responses[u * m + i] as i64 * self.sim_responses[v * m + i] as i64)
                    .sum();
                self.gram[u * n + v] = ip;
                self.gram[v * n + u] = ip;
            }
        }
    }

    /// Chooses this step's recommendations from the frozen state.
    pub fn recommend<R: Rng + ?Sized>(
        &self,
        params: &AlgoParams,
        step: StepType,
        rng: &mut R,
    ) -> Result<Recommendations, AlgoError> {
        match step {
            StepType::Preference(q) => self.preference_explore(params, q, rng),
            StepType::Similarity => Ok(self.similarity_explore(params)),
            StepType::Exploit => Ok(self.exploit(params, rng)),
        }
    }
}

struct ExploitScratch {
    count: Vec<u32>,
    sum: Vec<i64>,
    touched: Vec<usize>,
}

impl ExploitScratch {
    fn new(n_items: usize) -> Self {
        Self { count: vec![0; n_items], sum: vec![0; n_items], touched: Vec::new() }
    }

    fn reset(&mut self) {
        for &i in &self.touched {
            self.count[i] = 0;
            self.sum[i] = 0;
        }
        self.touched.clear();
    }
}

/// Runs User-CF against `env` for `horizon` steps.
///
/// Algorithm randomness comes from `seed`; responses from the
/// environment's own stream.
pub fn run(env: &Environment, params: &AlgoParams, horizon: usize, seed: u64) -> Result<RunTrace, AlgoError> {
    if horizon == 0 {
        return Err(AlgoError::EmptyHorizon);
    }
    let mut params = params.clone();
    params.feedback = env.feedback();
    let mut algo_rng = streams::stream(seed, 0, Purpose::Algorithm);
    let mut env_rng = env.response_stream();
    let mut state = AlgoState::init(&params, env.n_users(), env.n_items(), &mut algo_rng)?;
    let mut trace = RunTrace::new(env.n_users());
    for _ in 0..horizon {
        let record = step(&mut state, &params, env, &mut algo_rng, &mut env_rng)?;
        trace.steps.push(record);
    }
    Ok(trace)
}

/// Executes one scheduled step and advances the clock.
pub fn step<R: Rng + ?Sized, E: Rng + ?Sized>(
    state: &mut AlgoState,
    params: &AlgoParams,
    env: &Environment,
    algo_rng: &mut R,
    env_rng: &mut E,
) -> Result<StepRecord, AlgoError> {
    if env.n_users() != state.n_users || env.n_items() != state.n_items {
        return Err(AlgoError::Shape {
            env_users: env.n_users(),
            env_items: env.n_items(),
            users: state.n_users,
            items: state.n_items,
        });
    }
    let t = state.t;
    let st = step_type(t, params, state.n_batches(), algo_rng);
    let recs = state.recommend(params, st, algo_rng)?;
    let responses: Vec<i8> = recs
        .items
        .iter()
        .enumerate()
        .map(|(u, item)| item.map_or(0, |i| env.sample_response(u, i, env_rng)))
        .collect();
    state.commit(st.kind(), &recs.items, &responses);
    state.advance();
    Ok(StepRecord { t, step: st, items: recs.items, responses, fallbacks: recs.fallbacks })
}
