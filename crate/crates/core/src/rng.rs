//! Seed derivation for independent, reproducible random streams.
//!
//! Every stochastic consumer (scenario spawning, sensor noise, breeding, ...)
//! gets its own ChaCha8 stream keyed by a master seed and a path of integers.
//! Streams never depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Keep these stable: changing one changes every derived run.
pub mod tag {
    pub const SPAWN: u64 = 0x5350_4157;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const INIT: u64 = 0x494e_4954;
    pub const BREED: u64 = 0x4252_4544;
    pub const SCENARIO: u64 = 0x5343_454e;
    pub const TRIAL: u64 = 0x5452_494c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `seed` with each element of `path` into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, path))
}
