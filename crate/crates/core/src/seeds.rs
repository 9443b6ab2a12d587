//! Counter-based seed derivation. Every random stream is a pure function of
//! `(root, index, purpose)`, so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    World = 1,
    AffordanceNoise = 2,
    Synthetic = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, index: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ index) ^ purpose as u64)
}

pub fn rng_for(root: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, index, purpose))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, 2, Purpose::World), derive_seed(1, 2, Purpose::World));
        assert_ne!(derive_seed(1, 2, Purpose::World), derive_seed(1, 2, Purpose::AffordanceNoise));
        assert_ne!(derive_seed(1, 2, Purpose::World), derive_seed(1, 3, Purpose::World));
        assert_ne!(derive_seed(1, 2, Purpose::World), derive_seed(2, 2, Purpose::World));
    }
}
