//! Counter-based seed derivation.
//!
//! Every random draw in the toolkit flows from one 64-bit seed. Per-item
//! streams are derived by mixing (seed, stream, counter) through SplitMix64,
//! so parallel generation over items reproduces sequential output exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for stream `stream` and item `counter` under `seed`.
pub fn derive_rng(seed: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed ^ splitmix64(stream) ^ splitmix64(counter.rotate_left(17)));
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derivation_is_deterministic_and_stream_separated() {
        let mut a = derive_rng(7, 1, 0);
        let mut b = derive_rng(7, 1, 0);
        let mut c = derive_rng(7, 2, 0);
        assert_eq!(a.next_u64(), b.next_u64());
        assert_ne!(a.next_u64(), c.next_u64());
    }
}
