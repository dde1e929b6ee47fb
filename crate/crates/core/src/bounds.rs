//! Closed-form sample-complexity quantities for User-CF.
//!
//! * [`t_start`]: the cold-start time after which exploitation is guaranteed
//!   to be near optimal,
//! * [`reward_lower_bound`]: the guaranteed normalized reward
//!   `reward(T) / (N T)`,
//! * [`prop1_bound`]: the `lambda + 1/K` ceiling that holds for any online
//!   algorithm up to `T = lambda / pf^2`,
//! * [`recommended_params`]: `eta = nu/2`, `k = 9N/(40K)` and
//!   `Q = k pf delta^2 / (64 log(8M/conf))`,
//! * [`condition_flags`]: which validity conditions an input satisfies.
//!
//! All formulas use explicit constants; nothing is calibrated.

use libm::{floor, log, pow};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("parameter out of domain: {0}")]
    Domain(&'static str),
    #[error("horizon T = {horizon} is below the cold-start time {t_start}")]
    BeforeColdStart { horizon: f64, t_start: f64 },
    #[error("the necessity bound assumes M >= K (M = {n_items}, K = {n_types})")]
    FewerItemsThanTypes { n_items: usize, n_types: usize },
}

/// Model, algorithm and analysis parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsInput {
    pub n_users: usize,
    pub n_items: usize,
    pub n_types: usize,
    /// Noise gap `delta`.
    pub delta_gap: f64,
    pub nu: f64,
    pub pf: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub eta: f64,
    pub batch_size: usize,
    pub k_neighbors: usize,
    /// Failure probability of the guarantee.
    pub confidence_delta: f64,
    pub horizon: u64,
    /// Fraction used by the necessity bound.
    pub lambda: f64,
}

pub const DEFAULT_CONFIDENCE_DELTA: f64 = 0.1;

impl Default for BoundsInput {
    fn default() -> Self {
        Self {
            n_users: 1000,
            n_items: 5000,
            n_types: 10,
            delta_gap: 0.25,
            nu: 0.3,
            pf: 0.5,
            gamma: 0.5,
            alpha: 0.1,
            eta: 0.15,
            batch_size: 50,
            k_neighbors: 50,
            confidence_delta: DEFAULT_CONFIDENCE_DELTA,
            horizon: 100_000,
            lambda: 0.5,
        }
    }
}

/// Validity conditions of the reward guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionFlags {
    /// Enough users per type for the recommended `Q` to satisfy the batch
    /// size floor: `(9N/(40K)) pf delta^2 / (64 log(8M/conf)) >= (10/nu) log(4/conf)`.
    pub users_per_type: bool,
    /// `k / Q >= 64 log(8M/conf) / (pf delta^2)`.
    pub batch_ratio: bool,
    /// `Q >= (10/nu) log(4/conf)`.
    pub batch_floor: bool,
    /// `k <= 9N / (40K)`.
    pub neighbor_cap: bool,
    /// `eta <= nu / 2`.
    pub eta_cap: bool,
    /// `eta Q >= 2`.
    pub eta_q_floor: bool,
    /// `T_start <= T <= (4/5) nu M pf`.
    pub horizon_window: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.users_per_type
            && self.batch_ratio
            && self.batch_floor
            && self.neighbor_cap
            && self.eta_cap
            && self.eta_q_floor
            && self.horizon_window
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn named(&self) -> [(&'static str, bool); 7] {
        [
            ("users_per_type", self.users_per_type),
            ("batch_ratio", self.batch_ratio),
            ("batch_floor", self.batch_floor),
            ("neighbor_cap", self.neighbor_cap),
            ("eta_cap", self.eta_cap),
            ("eta_q_floor", self.eta_q_floor),
            ("horizon_window", self.horizon_window),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendedParams {
    pub eta: f64,
    pub k_neighbors: usize,
    pub batch_size: usize,
    /// Before rounding down.
    pub k_raw: f64,
    pub batch_raw: f64,
    /// Flags for the input with `(eta, k, Q)` replaced by this triple.
    pub flags: ConditionFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub t_start: f64,
    /// `None` when the horizon is below `t_start`.
    pub reward_lower_bound: Option<f64>,
    pub prop1_bound: f64,
    pub prop1_horizon: f64,
    pub recommended: RecommendedParams,
    pub flags: ConditionFlags,
}

fn require(cond: bool, what: &'static str) -> Result<(), BoundsError> {
    if cond {
        Ok(())
    } else {
        Err(BoundsError::Domain(what))
    }
}

fn check_common(input: &BoundsInput) -> Result<(), BoundsError> {
    require(input.n_users > 0 && input.n_items > 0 && input.n_types > 0, "N, M, K must be positive")?;
    require(input.delta_gap > 0.0, "delta must be positive")?;
    require(input.nu > 0.0, "nu must be positive")?;
    require(input.pf > 0.0, "pf must be positive")?;
    require(input.confidence_delta > 0.0, "confidence delta must be positive")?;
    Ok(())
}

/// `max(1/T, 2/(eta Q))`.
fn schedule_loss(input: &BoundsInput) -> f64 {
    let by_horizon = 1.0 / input.horizon as f64;
    let by_batches = 2.0 / (input.eta * input.batch_size as f64);
    by_horizon.max(by_batches)
}

/// Cold-start time
/// `(512 max(log(4NQ/(k delta)), log(88/conf)))^(1/(1-alpha))
///  / ((3 pf^2 (1-gamma)^2 nu)^(1/(1-alpha)) (1 - max(1/T, 2/(eta Q))))`.
pub fn t_start(input: &BoundsInput) -> Result<f64, BoundsError> {
    check_common(input)?;
    require(input.alpha > 0.0 && input.alpha < 1.0, "alpha must lie in (0, 1)")?;
    require((0.0..1.0).contains(&input.gamma), "gamma must lie in [0, 1)")?;
    require(input.eta > 0.0, "eta must be positive")?;
    require(input.batch_size > 0 && input.k_neighbors > 0, "Q and k must be positive")?;
    require(input.horizon > 0, "horizon must be positive")?;
    let tail = 1.0 - schedule_loss(input);
    require(tail > 0.0, "1 - max(1/T, 2/(eta Q)) must be positive (needs eta Q > 2 and T > 1)")?;

    let n = input.n_users as f64;
    let q = input.batch_size as f64;
    let k = input.k_neighbors as f64;
    let lead = 512.0 * log(4.0 * n * q / (k * input.delta_gap)).max(log(88.0 / input.confidence_delta));
    let exponent = 1.0 / (1.0 - input.alpha);
    let one_minus_gamma = 1.0 - input.gamma;
    let base = 3.0 * input.pf * input.pf * one_minus_gamma * one_minus_gamma * input.nu;
    Ok(pow(lead / base, exponent) / tail)
}

/// Lower bound on `reward(T) / (N T)`:
/// `(1 - T_start/T - 2^alpha (T - T_start)^(1-alpha) / (T (1-alpha))
///  - max(1/T, 2/(eta Q))) (1 - conf)`. May be negative.
pub fn reward_lower_bound(input: &BoundsInput) -> Result<f64, BoundsError> {
    let ts = t_start(input)?;
    let horizon = input.horizon as f64;
    if horizon < ts {
        return Err(BoundsError::BeforeColdStart { horizon, t_start: ts });
    }
    Ok(reward_lower_bound_at(input, ts, horizon))
}

/// The reward bound at horizon `horizon` for a precomputed `t_start`.
///
/// `t_start` itself depends on `T` only through `max(1/T, 2/(eta Q))`; use
/// [`reward_lower_bound`] when that matters.
pub fn reward_lower_bound_at(input: &BoundsInput, t_start: f64, horizon: f64) -> f64 {
    let a = input.alpha;
    let loss = (1.0 / horizon).max(2.0 / (input.eta * input.batch_size as f64));
    let similarity = pow(2.0, a) * pow(horizon - t_start, 1.0 - a) / (horizon * (1.0 - a));
    (1.0 - t_start / horizon - similarity - loss) * (1.0 - input.confidence_delta)
}

/// `(lambda + 1/K, lambda / pf^2)`.
pub fn prop1_bound(input: &BoundsInput) -> Result<(f64, f64), BoundsError> {
    require(input.lambda > 0.0 && input.lambda < 1.0, "lambda must lie in (0, 1)")?;
    require(input.n_types > 0, "K must be positive")?;
    require(input.pf > 0.0, "pf must be positive")?;
    if input.n_items < input.n_types {
        return Err(BoundsError::FewerItemsThanTypes { n_items: input.n_items, n_types: input.n_types });
    }
    Ok((input.lambda + 1.0 / input.n_types as f64, input.lambda / (input.pf * input.pf)))
}

/// `64 log(8M/conf) / (pf delta^2)`, the smallest admissible `k / Q`.
pub fn batch_ratio_floor(input: &BoundsInput) -> f64 {
    64.0 * log(8.0 * input.n_items as f64 / input.confidence_delta) / (input.pf * input.delta_gap * input.delta_gap)
}

/// `(10/nu) log(4/conf)`, the smallest admissible `Q`.
pub fn batch_size_floor(input: &BoundsInput) -> f64 {
    10.0 / input.nu * log(4.0 / input.confidence_delta)
}

/// `9N / (40K)`, the largest admissible `k`.
pub fn neighbor_cap(input: &BoundsInput) -> f64 {
    9.0 * input.n_users as f64 / (40.0 * input.n_types as f64)
}

/// Evaluates every validity condition for the input's own `(eta, k, Q, T)`.
pub fn condition_flags(input: &BoundsInput) -> ConditionFlags {
    let k = input.k_neighbors as f64;
    let q = input.batch_size as f64;
    let recommended_q = neighbor_cap(input) / batch_ratio_floor(input);
    let horizon = input.horizon as f64;
    let horizon_window = match t_start(input) {
        Ok(ts) => horizon >= ts && horizon <= 0.8 * input.nu * input.n_items as f64 * input.pf,
        Err(_) => false,
    };
    ConditionFlags {
        users_per_type: recommended_q >= batch_size_floor(input),
        batch_ratio: q > 0.0 && k / q >= batch_ratio_floor(input),
        batch_floor: q >= batch_size_floor(input),
        neighbor_cap: k <= neighbor_cap(input),
        eta_cap: input.eta <= input.nu / 2.0,
        eta_q_floor: input.eta * q >= 2.0,
        horizon_window,
    }
}

/// `eta = nu/2`, `k = floor(9N/(40K))`, `Q = floor(k pf delta^2 / (64 log(8M/conf)))`,
/// with `k` and `Q` at least 1. Infeasibility shows up in the flags.
pub fn recommended_params(input: &BoundsInput) -> RecommendedParams {
    let eta = input.nu / 2.0;
    let k_raw = neighbor_cap(input);
    let k_neighbors = (floor(k_raw) as usize).max(1);
    let batch_raw = k_neighbors as f64 / batch_ratio_floor(input);
    let batch_size = (floor(batch_raw) as usize).max(1);
    let applied = BoundsInput { eta, k_neighbors, batch_size, ..input.clone() };
    RecommendedParams { eta, k_neighbors, batch_size, k_raw, batch_raw, flags: condition_flags(&applied) }
}

/// Everything at once.
pub fn evaluate(input: &BoundsInput) -> Result<BoundsReport, BoundsError> {
    let t_start = t_start(input)?;
    let reward_lower_bound = match reward_lower_bound(input) {
        Ok(v) => Some(v),
        Err(BoundsError::BeforeColdStart { .. }) => None,
        Err(e) => return Err(e),
    };
    let (prop1_bound, prop1_horizon) = prop1_bound(input)?;
    Ok(BoundsReport {
        t_start,
        reward_lower_bound,
        prop1_bound,
        prop1_horizon,
        recommended: recommended_params(input),
        flags: condition_flags(input),
    })
}
