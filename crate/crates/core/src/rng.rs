//! Seeded, portable random streams.
//!
//! Every consumer derives its generator from `(seed, key)`: ChaCha20 keyed by
//! the 64-bit seed, with the stream number set to the FNV-1a hash of `key`.
//! Streams for different keys are independent, so work for one group or class
//! never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, key: &str) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(key.as_bytes()));
    rng
}
