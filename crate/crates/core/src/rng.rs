//! Seed derivation. Every stochastic stage gets its own stream derived from
//! the single pipeline seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream label plus index.
pub fn derive_seed(base: u64, stream: &str, index: u64) -> u64 {
    let mut h = mix(base);
    for b in stream.bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        let a = derive_seed(7, "kmeans", 0);
        assert_eq!(a, derive_seed(7, "kmeans", 0));
        assert_ne!(a, derive_seed(7, "kmeans", 1));
        assert_ne!(a, derive_seed(7, "amf", 0));
        assert_ne!(a, derive_seed(8, "kmeans", 0));
    }
}
