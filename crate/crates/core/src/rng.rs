//! Seeded random number generation.
//!
//! All randomness goes through [`SeededRng`], the PCG-XSL-RR 128/64 generator
//! (`rand_pcg::Pcg64`). Its output stream is fully specified by the seed and
//! independent of platform, so shuffles, splits and crop plans reproduce
//! bit-for-bit everywhere.

use rand::SeedableRng;

pub type SeededRng = rand_pcg::Pcg64;

pub fn seeded(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}
