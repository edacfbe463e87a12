//! Deterministic seed derivation and RNG construction.
//!
//! Every stochastic stage derives its stream from the master seed plus a
//! salt path, so artifacts are a pure function of the resolved config.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One splitmix64 step; stable across platforms.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a salt path.
pub fn derive_seed(seed: u64, salts: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &s in salts {
        state ^= s;
        out = splitmix64(&mut state);
    }
    out
}

/// Deterministic stream cipher RNG for the given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stable salt for a named purpose, so call sites read as
/// `derive_seed(seed, &[salt("candidates"), trial as u64])`.
pub fn salt(name: &str) -> u64 {
    let mut state = 0xcbf29ce484222325u64;
    for b in name.bytes() {
        state ^= b as u64;
        state = state.wrapping_mul(0x100000001b3);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_deterministic_and_salt_sensitive() {
        let a = derive_seed(7, &[salt("demos"), 3]);
        let b = derive_seed(7, &[salt("demos"), 3]);
        let c = derive_seed(7, &[salt("demos"), 4]);
        let d = derive_seed(7, &[salt("candidates"), 3]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn rng_streams_reproduce() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        let x1: f64 = r1.gen();
        let x2: f64 = r2.gen();
        assert_eq!(x1, x2);
    }
}
