//! The response channel between the recommender and its users.

use alloc::vec::Vec;

use rand::Rng;

use crate::model::PreferenceMatrix;
use crate::signed::SignedMatrix;
use crate::streams::{self, Purpose};

/// Whether negative ratings are ever observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeedbackMode {
    /// Responses in `{0, 1}`; a dislike looks like no response.
    #[default]
    OneClass,
    /// Responses in `{-1, 0, +1}`.
    TwoClass,
}

impl FeedbackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::OneClass => "one-class",
            FeedbackMode::TwoClass => "two-class",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvKind {
    Synthetic(PreferenceMatrix),
    Replay(SignedMatrix),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("reveal probability {0} outside [0, 1]")]
    RevealProbability(f64),
    #[error("fixed hidden ratings only apply to synthetic environments")]
    FixedOnReplay,
}

/// A synthetic or replayed environment.
///
/// Synthetic hidden ratings are redrawn on every recommendation unless
/// [`Environment::with_fixed_realization`] pinned them once per `(u, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    kind: EnvKind,
    pf: f64,
    feedback: FeedbackMode,
    seed: u64,
    fixed: Option<Vec<i8>>,
}

impl Environment {
    /// `pf` may be 0, which silences every response.
    pub fn new(kind: EnvKind, pf: f64, feedback: FeedbackMode, seed: u64) -> Result<Self, EnvError> {
        if !(0.0..=1.0).contains(&pf) {
            return Err(EnvError::RevealProbability(pf));
        }
        Ok(Self { kind, pf, feedback, seed, fixed: None })
    }

    pub fn synthetic(pm: PreferenceMatrix, pf: f64, feedback: FeedbackMode, seed: u64) -> Result<Self, EnvError> {
        Self::new(EnvKind::Synthetic(pm), pf, feedback, seed)
    }

    pub fn replay(m: SignedMatrix, pf: f64, feedback: FeedbackMode, seed: u64) -> Result<Self, EnvError> {
        Self::new(EnvKind::Replay(m), pf, feedback, seed)
    }

    /// Draws every hidden rating `R_ui` once, from this environment's seed.
    pub fn with_fixed_realization(mut self) -> Result<Self, EnvError> {
        let EnvKind::Synthetic(pm) = &self.kind else {
            return Err(EnvError::FixedOnReplay);
        };
        let mut rng = streams::stream(self.seed, 1, Purpose::Environment);
        let fixed = pm.probs().iter().map(|&p| if rng.gen::<f64>() < p { 1 } else { -1 }).collect();
        self.fixed = Some(fixed);
        Ok(self)
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn pf(&self) -> f64 {
        self.pf
    }

    pub fn feedback(&self) -> FeedbackMode {
        self.feedback
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn has_fixed_realization(&self) -> bool {
        self.fixed.is_some()
    }

    pub fn n_users(&self) -> usize {
        match &self.kind {
            EnvKind::Synthetic(pm) => pm.n_users(),
            EnvKind::Replay(m) => m.n_rows(),
        }
    }

    pub fn n_items(&self) -> usize {
        match &self.kind {
            EnvKind::Synthetic(pm) => pm.n_items(),
            EnvKind::Replay(m) => m.n_cols(),
        }
    }

    /// The stream responses are drawn from during a run.
    pub fn response_stream(&self) -> streams::StreamRng {
        streams::stream(self.seed, 0, Purpose::Environment)
    }

    /// One response to recommending `item` to `user`.
    ///
    /// Both coins are always consumed so the stream position depends only on
    /// the number of calls.
    pub fn sample_response<R: Rng + ?Sized>(&self, user: usize, item: usize, rng: &mut R) -> i8 {
        let hidden_coin: f64 = rng.gen();
        let reveal = rng.gen::<f64>() < self.pf;
        let hidden = match &self.kind {
            EnvKind::Synthetic(pm) => match &self.fixed {
                Some(fixed) => fixed[user * pm.n_items() + item],
                None => {
                    if hidden_coin < pm.prob(user, item) {
                        1
                    } else {
                        -1
                    }
                }
            },
            EnvKind::Replay(m) => m.get(user, item),
        };
        if !reveal {
            return 0;
        }
        match self.feedback {
            FeedbackMode::OneClass => (hidden == 1) as i8,
            FeedbackMode::TwoClass => hidden,
        }
    }
}
