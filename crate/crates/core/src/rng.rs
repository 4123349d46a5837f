//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a 64-bit-seeded counter-based generator
//! whose output is identical on every platform. Independent consumers draw
//! from distinct stream ids of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub const PROPOSAL_STREAM: u64 = 0;
pub const ACCEPTANCE_STREAM: u64 = 1;

pub fn stream(seed: u64, stream_id: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
