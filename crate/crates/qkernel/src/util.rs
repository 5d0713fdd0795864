//! Small deterministic helpers shared across modules.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;

/// Fisher-Yates shuffle driven by the seeded stream; the modulo bias is
/// negligible for the index ranges used here and keeps the sequence
/// platform-independent.
pub(crate) fn shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

/// Uniform f64 in [0, 1) from the top 53 bits of the stream.
pub(crate) fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64) / (1u64 << 53) as f64
}

/// splitmix64 mix of a master seed and a salt, for deriving independent
/// sub-seeds deterministically.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
