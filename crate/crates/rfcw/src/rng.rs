//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator seeded from the 64-bit master seed and
//! positioned on its own stream id, so field sampling and each Monte Carlo
//! replica draw from independent sequences that do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used to sample the random field.
pub const FIELD_STREAM: u64 = 0;
/// Base id for hitting-time replicas; replica `r` uses `REPLICA_BASE + r`.
pub const REPLICA_BASE: u64 = 1 << 32;
/// Base id for flow-path sampling.
pub const PATH_BASE: u64 = 2 << 32;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
