//! Simulation core for online one-class collaborative filtering.
//!
//! Users belong to latent types that share a set of likable items. The
//! recommender only ever observes positive feedback, revealed with
//! probability `pf`, and has to learn both who is similar to whom and what
//! each neighborhood likes while it is recommending.
//!
//! The crate is `no_std` (it needs `alloc`) and contains:
//!
//! * [`model`]: latent preference matrices with user types and the
//!   separation measure between types.
//! * [`env`]: the stochastic response channel, synthetic or replayed from a
//!   signed ratings matrix, in one-class or two-class mode.
//! * [`usercf`]: the online User-CF policy (scheduler, similarity and
//!   preference exploration, k-NN exploitation) and the run loop.
//! * [`bounds`]: closed-form cold-start time, reward lower bound and the
//!   `1/pf^2` necessity bound, with their validity conditions.
//! * [`reward`]: per-step reward accounting over run traces.
//! * [`streams`]: deterministic splitting of one root seed into independent
//!   RNG streams.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod env;
pub mod model;
pub mod reward;
pub mod signed;
pub mod streams;
pub mod trace;
pub mod usercf;

pub use bounds::{BoundsError, BoundsInput, BoundsReport, ConditionFlags, RecommendedParams};
pub use env::{EnvKind, Environment, FeedbackMode};
pub use model::{ModelError, ModelParams, PreferenceMatrix};
pub use reward::RewardError;
pub use signed::SignedMatrix;
pub use streams::Purpose;
pub use trace::{RunTrace, StepRecord};
pub use usercf::{AlgoError, AlgoParams, AlgoState, Recommendations, StepKind, StepType};
