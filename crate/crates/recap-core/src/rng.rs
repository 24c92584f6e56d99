//! Seed plumbing.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! the run seed, so adding draws to one component (say, a new augmentation)
//! never perturbs another (say, parameter init). Per-sample work derives a
//! further stream from the sample index, which keeps results independent of
//! iteration order and worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable identifiers for the independent random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    /// Model parameter initialization.
    Params,
    /// Scene generation and artefact sampling.
    Data,
    /// Training-time augmentation.
    Augment,
    /// Batch shuffling.
    Shuffle,
    /// Train/val/test splitting.
    Split,
    /// Domain-discriminator initialization.
    Adversarial,
    /// t-SNE embedding init.
    Embedding,
}

impl StreamId {
    fn tag(self) -> u64 {
        match self {
            StreamId::Params => 1,
            StreamId::Data => 2,
            StreamId::Augment => 3,
            StreamId::Shuffle => 4,
            StreamId::Split => 5,
            StreamId::Adversarial => 6,
            StreamId::Embedding => 7,
        }
    }
}

/// RNG for one component of a run.
pub fn stream(seed: u64, id: StreamId) -> ChaCha8Rng {
    substream(seed, id, 0)
}

/// RNG for per-item work inside a component (sample index, epoch number).
/// Distinct `(id, index)` pairs never share a stream.
pub fn substream(seed: u64, id: StreamId, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // ChaCha streams are indexed by a 64-bit id; splitting the bits between
    // the component tag and the item index keeps all pairs distinct.
    rng.set_stream(id.tag() << 48 | (index & 0xffff_ffff_ffff));
    rng
}
