//! Counter-based seeding.
//!
//! Every random quantity in a run is addressed by a tuple of integers that is
//! folded into a 64-bit seed, so any sample can be regenerated without
//! replaying a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed. Order matters.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| mix64(acc ^ mix64(p)))
}

pub fn rng_for(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(parts))
}

/// Domain tags keep independent consumers of the same seed apart.
pub mod tags {
    pub const CLASS_MEANS: u64 = 0x4d45_414e;
    pub const SAMPLE: u64 = 0x5341_4d50;
    pub const HOLDOUT: u64 = 0x484f_4c44;
    pub const TOPOLOGY: u64 = 0x544f_504f;
    pub const INSTANCE: u64 = 0x494e_5354;
    pub const STREAM: u64 = 0x5354_524d;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const NOISE_PROBE: u64 = 0x4e4f_4953;
}
