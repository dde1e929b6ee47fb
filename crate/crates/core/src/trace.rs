use alloc::vec::Vec;

use crate::usercf::StepType;

/// What happened at one time step of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub t: usize,
    pub step: StepType,
    /// Item recommended to each user; `None` when the user was exhausted.
    pub items: Vec<Option<usize>>,
    /// Response of each user (0 for exhausted users).
    pub responses: Vec<i8>,
    /// Users served by a fallback rule at this step.
    pub fallbacks: u32,
}

/// The full record of a run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunTrace {
    pub n_users: usize,
    pub steps: Vec<StepRecord>,
}

impl RunTrace {
    pub fn new(n_users: usize) -> Self {
        Self { n_users, steps: Vec::new() }
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Iterates `(t, step, user, item, response)` over non-exhausted users.
    pub fn records(&self) -> impl Iterator<Item = (usize, StepType, usize, usize, i8)> + '_ {
        self.steps.iter().flat_map(|s| {
            s.items
                .iter()
                .zip(&s.responses)
                .enumerate()
                .filter_map(move |(u, (item, &r))| item.map(|i| (s.t, s.step, u, i, r)))
        })
    }

    pub fn total_fallbacks(&self) -> u64 {
        self.steps.iter().map(|s| s.fallbacks as u64).sum()
    }
}
