//! Seeded random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream,
//! derived from the single run seed and a fixed stream number, so that a
//! run is reproducible bit-for-bit and consumers never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used by the synthetic-data generator.
pub const SIMULATION_STREAM: u64 = 0;
/// Stream used by the random-walk Metropolis warm-up.
pub const WARMUP_STREAM: u64 = 1;
/// Stream used by the independence Metropolis-Hastings phase.
pub const ADAPTIVE_STREAM: u64 = 2;

pub type ChainRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
