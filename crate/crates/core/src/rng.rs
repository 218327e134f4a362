//! Seed derivation. Every random draw in the crate goes through a ChaCha
//! stream keyed by a base seed plus a purpose tag, so results never depend on
//! call order across subsystems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one well-mixed seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn stream(words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(words))
}

// Purpose tags.
pub const TAG_LAYOUT: u64 = 1;
pub const TAG_VEHICLES: u64 = 2;
pub const TAG_UAVS: u64 = 3;
pub const TAG_NLOS_PHASE: u64 = 4;
pub const TAG_FAILURE: u64 = 5;
pub const TAG_SPLIT: u64 = 6;
pub const TAG_INIT: u64 = 7;
pub const TAG_SHUFFLE: u64 = 8;
pub const TAG_DROPOUT: u64 = 9;
