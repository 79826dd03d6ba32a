//! Seeded random streams. Every random draw in the crate flows from a
//! `u64` seed through ChaCha8, so results are identical across platforms
//! and runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng
}
