//! Deterministic per-trial RNG streams: every trial derives its generator
//! from (seed, stream id), so thread scheduling never changes results.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `stream` of run seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Stream id from a few coordinates (condition index, trial index, salt).
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut acc = 0xD6E8_FEB8_6659_FD93_u64;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}
