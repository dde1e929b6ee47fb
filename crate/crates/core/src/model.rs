//! Latent preference model: users, types and per-item like probabilities.
//!
//! Every user `u` has a preference vector `p_u` in `[0,1]^M`. An item is
//! likable for `u` when `p_ui >= 1/2 + delta` and not likable when
//! `p_ui <= 1/2 - delta`; users of the same type find exactly the same items
//! likable. How distinct the types are is measured by the separation
//! `gamma`, see [`check_separation`].

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::streams::{self, Purpose};

/// Default number of redraws when a separation target is set.
pub const DEFAULT_RETRY_BUDGET: u32 = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    Params(&'static str),
    #[error("separation target {target} not reached after {attempts} draws (best gamma {best})")]
    GammaNotReached { target: f64, best: f64, attempts: u32 },
    #[error("user {user} has a zero inner product with a user of its own type")]
    DegenerateSeparation { user: usize },
    #[error("preference matrix violates an invariant: {0}")]
    Invariant(&'static str),
}

/// How the likable item sets of the types are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikableLayout {
    /// Each type draws its likable set independently and uniformly.
    #[default]
    Random,
    /// Types get pairwise disjoint likable sets (needs `K * ceil(nu M) <= M`).
    Disjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n_users: usize,
    pub n_items: usize,
    pub n_types: usize,
    /// Gap `delta` in `(0, 1/2]` separating likable from non-likable.
    pub delta: f64,
    /// Minimum fraction of likable items per user.
    pub nu: f64,
    /// Reveal probability of a positive rating.
    pub pf: f64,
    /// Largest acceptable separation; draws above it are retried.
    pub gamma_target: Option<f64>,
    pub retry_budget: u32,
    pub layout: LikableLayout,
}

impl ModelParams {
    pub fn new(n_users: usize, n_items: usize, n_types: usize, delta: f64, nu: f64, pf: f64) -> Self {
        Self {
            n_users,
            n_items,
            n_types,
            delta,
            nu,
            pf,
            gamma_target: None,
            retry_budget: DEFAULT_RETRY_BUDGET,
            layout: LikableLayout::Random,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_users == 0 || self.n_items == 0 || self.n_types == 0 {
            return Err(ModelError::Params("N, M and K must be positive"));
        }
        if self.n_types > self.n_users {
            return Err(ModelError::Params("more types than users (K > N)"));
        }
        if self.n_types > self.n_items {
            return Err(ModelError::Params("more types than items (K > M)"));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(ModelError::Params("delta must lie in (0, 1/2]"));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(ModelError::Params("nu must lie in (0, 1]"));
        }
        if !(self.pf > 0.0 && self.pf <= 1.0) {
            return Err(ModelError::Params("pf must lie in (0, 1]"));
        }
        if self.nu * (self.n_items as f64) < 1.0 {
            return Err(ModelError::Params("nu * M must be at least 1"));
        }
        if let Some(g) = self.gamma_target {
            if !(0.0..1.0).contains(&g) {
                return Err(ModelError::Params("gamma target must lie in [0, 1)"));
            }
        }
        if self.layout == LikableLayout::Disjoint && self.n_types * self.likable_count() > self.n_items {
            return Err(ModelError::Params("disjoint layout needs K * ceil(nu M) <= M"));
        }
        Ok(())
    }

    /// Size of each type's likable set, `ceil(nu M)`.
    pub fn likable_count(&self) -> usize {
        // Absorbs representation error in products such as 0.3 * 600.
        (libm::ceil(self.nu * self.n_items as f64 - 1e-9) as usize).clamp(1, self.n_items)
    }
}

/// A drawn preference matrix together with its type assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    n_users: usize,
    n_items: usize,
    n_types: usize,
    delta: f64,
    nu: f64,
    pf: f64,
    probs: Vec<f64>,
    type_of: Vec<usize>,
    achieved_gamma: f64,
}

impl PreferenceMatrix {
    /// Builds a matrix from explicit probabilities (row-major, `N x M`).
    ///
    /// All invariants are checked and the separation is measured.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_items: usize,
        n_types: usize,
        probs: Vec<f64>,
        type_of: Vec<usize>,
        delta: f64,
        nu: f64,
        pf: f64,
    ) -> Result<Self, ModelError> {
        let n_users = type_of.len();
        if n_items == 0 || probs.len() != n_users * n_items {
            return Err(ModelError::Params("probability matrix does not match N x M"));
        }
        if n_types == 0 || type_of.iter().any(|&t| t >= n_types) {
            return Err(ModelError::Params("type index out of range"));
        }
        let mut pm = Self {
            n_users,
            n_items,
            n_types,
            delta,
            nu,
            pf,
            probs,
            type_of,
            achieved_gamma: 0.0,
        };
        pm.validate()?;
        pm.achieved_gamma = check_separation(&pm)?;
        Ok(pm)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn pf(&self) -> f64 {
        self.pf
    }

    #[inline]
    pub fn prob(&self, user: usize, item: usize) -> f64 {
        self.probs[user * self.n_items + item]
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.probs[user * self.n_items..(user + 1) * self.n_items]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn type_of(&self) -> &[usize] {
        &self.type_of
    }

    pub fn achieved_gamma(&self) -> f64 {
        self.achieved_gamma
    }

    /// `p_ui > 1/2`.
    #[inline]
    pub fn is_likable(&self, user: usize, item: usize) -> bool {
        self.prob(user, item) > 0.5
    }

    /// Number of users of each type.
    pub fn type_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_types];
        for &t in &self.type_of {
            sizes[t] += 1;
        }
        sizes
    }

    /// Checks every structural invariant of a preference matrix.
    pub fn validate(&self) -> Result<(), ModelError> {
        let upper = 0.5 + self.delta;
        let lower = 0.5 - self.delta;
        // Tolerates the rounding in 1/2 +- delta itself.
        let eps = 1e-12;
        for &p in &self.probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::Invariant("probability outside [0, 1]"));
            }
            if p < upper - eps && p > lower + eps {
                return Err(ModelError::Invariant("probability within delta of 1/2"));
            }
        }
        let floor = self.n_users / (2 * self.n_types);
        if self.type_sizes().iter().any(|&s| s < floor.max(1)) {
            return Err(ModelError::Invariant("a type has fewer than N/(2K) members"));
        }
        let mut representative: Vec<Option<usize>> = vec![None; self.n_types];
        for u in 0..self.n_users {
            let t = self.type_of[u];
            match representative[t] {
                None => representative[t] = Some(u),
                Some(r) => {
                    let same = (0..self.n_items).all(|i| self.is_likable(u, i) == self.is_likable(r, i));
                    if !same {
                        return Err(ModelError::Invariant("users of one type disagree on likable items"));
                    }
                }
            }
        }
        let needed = self.nu * self.n_items as f64 - 1e-9;
        for u in 0..self.n_users {
            let liked = (0..self.n_items).filter(|&i| self.is_likable(u, i)).count();
            if (liked as f64) < needed {
                return Err(ModelError::Invariant("a user likes fewer than nu M items"));
            }
        }
        Ok(())
    }
}

/// Draws a preference matrix.
///
/// Users are assigned to types round-robin. Each type gets `ceil(nu M)`
/// likable items; likable probabilities are uniform on `[1/2 + delta, 1]` and
/// the rest uniform on `[0, 1/2 - delta]`. With a separation target the
/// whole draw is repeated until `gamma <= target` or the retry budget runs
/// out.
pub fn generate_model(params: &ModelParams, seed: u64) -> Result<PreferenceMatrix, ModelError> {
    params.validate()?;
    let mut rng = streams::stream(seed, 0, Purpose::Model);
    let attempts = if params.gamma_target.is_some() { params.retry_budget.max(1) } else { 1 };
    let mut best = f64::INFINITY;
    for _ in 0..attempts {
        let pm = draw_once(params, &mut rng)?;
        match params.gamma_target {
            Some(target) if pm.achieved_gamma > target => {
                best = best.min(pm.achieved_gamma);
            }
            _ => return Ok(pm),
        }
    }
    Err(ModelError::GammaNotReached {
        target: params.gamma_target.unwrap_or(0.0),
        best,
        attempts,
    })
}

fn draw_once<R: Rng>(params: &ModelParams, rng: &mut R) -> Result<PreferenceMatrix, ModelError> {
    let n = params.n_users;
    let m = params.n_items;
    let k = params.n_types;
    let count = params.likable_count();

    let mut likable = vec![false; k * m];
    match params.layout {
        LikableLayout::Random => {
            for t in 0..k {
                for i in index::sample(rng, m, count).iter() {
                    likable[t * m + i] = true;
                }
            }
        }
        LikableLayout::Disjoint => {
            let mut items: Vec<usize> = (0..m).collect();
            items.shuffle(rng);
            for t in 0..k {
                for &i in &items[t * count..(t + 1) * count] {
                    likable[t * m + i] = true;
                }
            }
        }
    }

    let type_of: Vec<usize> = (0..n).map(|u| u % k).collect();
    let hi = 0.5 + params.delta;
    let lo = 0.5 - params.delta;
    let mut probs = Vec::with_capacity(n * m);
    for &t in &type_of {
        for i in 0..m {
            let p = if likable[t * m + i] { rng.gen_range(hi..=1.0) } else { rng.gen_range(0.0..=lo) };
            probs.push(p);
        }
    }

    let mut pm = PreferenceMatrix {
        n_users: n,
        n_items: m,
        n_types: k,
        delta: params.delta,
        nu: params.nu,
        pf: params.pf,
        probs,
        type_of,
        achieved_gamma: 0.0,
    };
    pm.achieved_gamma = check_separation(&pm)?;
    Ok(pm)
}

/// The non-overlapping `{0, 1}` construction: `K` types over `K` items, type
/// `t` likes exactly one item and nothing else.
pub fn non_overlapping_binary(n_users: usize, n_types: usize, pf: f64, seed: u64) -> Result<PreferenceMatrix, ModelError> {
    let mut params = ModelParams::new(n_users, n_types, n_types, 0.5, 1.0 / n_types as f64, pf);
    params.layout = LikableLayout::Disjoint;
    generate_model(&params, seed)
}

/// Smallest `gamma` for which every user satisfies
/// `gamma * min_{v in T_u} <p_u, p_v> >= max_{v not in T_u} <p_u, p_v>`.
///
/// The within-type minimum includes `v = u`. A single type gives 0.
pub fn check_separation(pm: &PreferenceMatrix) -> Result<f64, ModelError> {
    if pm.n_types < 2 {
        return Ok(0.0);
    }
    let n = pm.n_users;
    let mut gram = vec![0.0f64; n * n];
    for u in 0..n {
        let pu = pm.row(u);
        for v in u..n {
            let ip: f64 = pu.iter().zip(pm.row(v)).map(|(a, b)| a * b).sum();
            gram[u * n + v] = ip;
            gram[v * n + u] = ip;
        }
    }
    let mut gamma = 0.0f64;
    for u in 0..n {
        let mut within = f64::INFINITY;
        let mut across = 0.0f64;
        for v in 0..n {
            let ip = gram[u * n + v];
            if pm.type_of[v] == pm.type_of[u] {
                within = within.min(ip);
            } else {
                across = across.max(ip);
            }
        }
        if within <= 0.0 {
            return Err(ModelError::DegenerateSeparation { user: u });
        }
        gamma = gamma.max(across / within);
    }
    Ok(gamma)
}
