//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator built from a
//! single 64-bit root seed plus a component stream id, so two components never
//! share a sequence and no draw depends on wall-clock state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Component stream ids. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Sampling = 3,
    Synth = 4,
    Assignment = 5,
    Shuffle = 6,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Derives an independent child seed, e.g. one per grid cell or per repeat.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over (seed, index)
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, Stream::Init).random();
        let b: u64 = stream(7, Stream::Init).random();
        let c: u64 = stream(7, Stream::Dropout).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
    }
}
