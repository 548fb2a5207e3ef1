//! Labeled RNG streams derived from one master seed.
//!
//! Every randomized stage of a run (ancestor construction, trajectory
//! growth, per-generation selection, per-offspring mutation) pulls from its
//! own ChaCha stream, so reordering or parallelizing one stage can never
//! perturb another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose label baked into the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Ancestor = 0,
    Trajectory = 1,
    Selection = 2,
    Mutation = 3,
}

/// Derives independent, reproducible RNG streams from a master seed.
#[derive(Debug, Clone, Copy)]
pub struct RngFactory {
    seed: u64,
}

impl RngFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// RNG for `purpose` with a sub-index (generation, offspring slot, ...).
    ///
    /// The index must fit in 56 bits; the purpose tag occupies the top byte
    /// of the ChaCha stream id.
    pub fn stream(&self, purpose: StreamPurpose, index: u64) -> ChaCha8Rng {
        debug_assert!(index < (1 << 56));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 56) | index);
        rng
    }
}
