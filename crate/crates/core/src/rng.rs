//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a master seed; independent
//! tasks (replicates, chains, methods within a replicate) select disjoint
//! ChaCha stream ids, so they never share state and results do not depend on
//! scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for a single run identified only by its seed.
pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream number `index` derived from `master_seed`.
pub fn substream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Packs a (replicate, slot) pair into a stream id so that each replicate
/// owns `slots` disjoint streams.
pub fn stream_id(replicate: u64, slot: u64, slots: u64) -> u64 {
    replicate * slots + slot
}
