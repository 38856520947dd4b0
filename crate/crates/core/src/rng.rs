//! Per-trajectory random streams.
//!
//! Stream `k` of an ensemble is seeded with a SplitMix64 hash of
//! `(master_seed, k)` and drives a ChaCha8 generator, itself a counter-based
//! cipher. Streams are therefore independent of the order in which
//! trajectories are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index` under `master_seed`.
pub fn derive_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index.wrapping_mul(GOLDEN))
}

pub fn stream(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Exponential variate with the given rate (ziggurat unit exponential, scaled).
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(rand_distr::Exp1);
    e / rate
}
