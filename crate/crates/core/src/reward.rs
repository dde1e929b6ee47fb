//! Reward accounting over run traces.
//!
//! Replay environments score a recommendation by its stored signed entry,
//! synthetic ones by whether the item is likable (`p_ui > 1/2`). Exhausted
//! users contribute 0 but still count in the `1/N` normalization.

use alloc::vec::Vec;

use crate::env::{EnvKind, Environment};
use crate::trace::RunTrace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewardError {
    #[error("signed reward needs a replay environment; use the likable reward for synthetic ones")]
    NotReplay,
    #[error("likable reward needs a synthetic environment with known preferences")]
    NotSynthetic,
    #[error("time step {t} is outside the trace (horizon {horizon})")]
    OutOfRange { t: usize, horizon: usize },
}

/// `sum_u R[u, i(u, t)]` over a replay environment.
pub fn reward_numerator_at(trace: &RunTrace, env: &Environment, t: usize) -> Result<i64, RewardError> {
    let EnvKind::Replay(m) = env.kind() else {
        return Err(RewardError::NotReplay);
    };
    let step = trace.steps.get(t).ok_or(RewardError::OutOfRange { t, horizon: trace.horizon() })?;
    Ok(step
        .items
        .iter()
        .enumerate()
        .filter_map(|(u, item)| item.map(|i| m.get(u, i) as i64))
        .sum())
}

/// `(1/N) sum_u R[u, i(u, t)]`.
pub fn reward_at(trace: &RunTrace, env: &Environment, t: usize) -> Result<f64, RewardError> {
    Ok(reward_numerator_at(trace, env, t)? as f64 / trace.n_users as f64)
}

/// Number of users recommended a likable item at step `t`.
pub fn likable_count_at(trace: &RunTrace, env: &Environment, t: usize) -> Result<usize, RewardError> {
    let EnvKind::Synthetic(pm) = env.kind() else {
        return Err(RewardError::NotSynthetic);
    };
    let step = trace.steps.get(t).ok_or(RewardError::OutOfRange { t, horizon: trace.horizon() })?;
    Ok(step
        .items
        .iter()
        .enumerate()
        .filter(|(u, item)| item.is_some_and(|i| pm.is_likable(*u, i)))
        .count())
}

/// `(1/N) sum_u 1{p_{u, i(u, t)} > 1/2}`.
pub fn likable_reward_at(trace: &RunTrace, env: &Environment, t: usize) -> Result<f64, RewardError> {
    Ok(likable_count_at(trace, env, t)? as f64 / trace.n_users as f64)
}

/// Prefix sums of the integer reward numerators: entry `T` is
/// `sum_{t < T} sum_u R[u, i(u, t)]`, for `T = 0..=horizon`.
pub fn acc_numerators(trace: &RunTrace, env: &Environment) -> Result<Vec<i64>, RewardError> {
    let mut out = Vec::with_capacity(trace.horizon() + 1);
    let mut acc = 0i64;
    out.push(0);
    for t in 0..trace.horizon() {
        acc += reward_numerator_at(trace, env, t)?;
        out.push(acc);
    }
    Ok(out)
}

/// `acc-reward(T) = sum_{t < T} reward(t)` for `T = 0..=horizon`.
///
/// Computed as integer prefix sums divided by `N`, so traces with equal
/// totals give bit-identical values.
pub fn acc_reward(trace: &RunTrace, env: &Environment) -> Result<Vec<f64>, RewardError> {
    let n = trace.n_users as f64;
    Ok(acc_numerators(trace, env)?.into_iter().map(|a| a as f64 / n).collect())
}

/// Likable fraction of each step.
pub fn likable_curve(trace: &RunTrace, env: &Environment) -> Result<Vec<f64>, RewardError> {
    (0..trace.horizon()).map(|t| likable_reward_at(trace, env, t)).collect()
}
