//! Deterministic seed derivation. Every random choice in the tool flows from
//! one user-visible seed through these fixed mixers, so generated suites are
//! reproducible across runs, platforms and worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; stable by construction, unlike `DefaultHasher`.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from a parent seed and a salt.
pub fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// FNV-1a over UTF-8 bytes, for salting seeds with stable string keys.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// The one RNG used throughout; ChaCha streams are portable and stable.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn mixing_is_stable() {
        assert_eq!(mix(1, 2), mix(1, 2));
        assert_ne!(mix(1, 2), mix(1, 3));
        assert_ne!(mix(1, 2), mix(2, 2));
    }

    #[test]
    fn fnv_distinguishes_keys() {
        assert_ne!(fnv1a("T1:P1"), fnv1a("T1:P2"));
        assert_eq!(fnv1a("board"), fnv1a("board"));
    }

    #[test]
    fn rng_streams_reproduce() {
        let a: u64 = rng(7).gen();
        let b: u64 = rng(7).gen();
        assert_eq!(a, b);
    }
}
