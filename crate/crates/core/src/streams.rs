//! Splitting one root seed into independent, reproducible RNG streams.
//!
//! Every consumer of randomness asks for its own stream keyed by
//! `(replicate, purpose)`. Streams never depend on the order in which other
//! streams are drawn from, so replicates can run on any number of threads and
//! still produce bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Drawing a latent preference matrix.
    Model,
    /// Hidden ratings and reveal coins of the response channel.
    Environment,
    /// The recommender's own randomness (permutation, batches, schedule).
    Algorithm,
    /// Item splits and scripted recommendation phases in experiments.
    Experiment,
    /// Anything else, tagged by the caller.
    Other(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Model => 1,
            Purpose::Environment => 2,
            Purpose::Algorithm => 3,
            Purpose::Experiment => 4,
            Purpose::Other(x) => 0x100 ^ splitmix64(x),
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// The stream for `(root, replicate, purpose)`.
pub fn stream(root: u64, replicate: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(root, replicate));
    rng.set_stream(purpose.tag());
    rng
}

/// A stream seeded directly from `seed`, for single-purpose callers.
pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
