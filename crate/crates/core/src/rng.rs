//! Seeded randomness. Every random probe derives from one config seed through
//! SplitMix64 (Steele, Lea & Flood 2014), so probe sequences are reproducible
//! across runs and implementations.

use rand_core::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64;

pub fn generator(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniform on `[0, 1)` from the top 53 bits.
pub fn unit(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `[-1, 1)`.
pub fn symmetric(rng: &mut SplitMix64) -> f64 {
    2.0 * unit(rng) - 1.0
}
