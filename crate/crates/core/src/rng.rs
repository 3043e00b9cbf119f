//! Seeded generator streams.
//!
//! Every stochastic run draws from a ChaCha8 stream keyed by the master seed
//! and selected by a 64-bit stream id, so runs are independent of each other
//! and of the order in which a worker pool executes them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator recorded in every emitted result.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64 + set_stream)";

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
