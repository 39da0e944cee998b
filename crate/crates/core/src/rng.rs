//! Reproducible RNG sub-streams derived from one 64-bit master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream keyed by `(master, trial, round)`.
///
/// The result depends only on the key, never on the order in which streams
/// are requested, so parallel trials reproduce sequential ones.
pub fn derive_rng(master: u64, trial: u64, round: u64) -> StreamRng {
    let mut seed = [0u8; 32];
    let mut state = splitmix64(master);
    state = splitmix64(state ^ trial);
    state = splitmix64(state ^ round.rotate_left(32));
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream seeded directly from `seed`.
pub fn seeded(seed: u64) -> StreamRng {
    derive_rng(seed, 0, 0)
}
