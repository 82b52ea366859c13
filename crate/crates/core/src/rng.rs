//! Seeded generators. Every random step in the pipeline draws from a stream derived from one
//! user seed, so identical inputs reproduce bit-identical outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type NpRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> NpRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finaliser applied to `base ⊕ φ·(stream+1)`: independent-looking child seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
