//! Seed-derived random streams.
//!
//! Every random draw in the simulator comes from a ChaCha stream addressed by
//! `(master seed, purpose, index)`. Work items own their stream, so results
//! do not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Schedule = 1,
    /// Fading realization plus measurement noise of one RSS sample.
    Sample = 2,
    /// Free-standing Monte Carlo draws (tests, checks).
    MonteCarlo = 3,
}

pub fn stream(master_seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Mixes a run seed into a master seed (splitmix64 finalizer).
pub fn derive_seed(master_seed: u64, run_seed: u64) -> u64 {
    let mut z = master_seed ^ run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
