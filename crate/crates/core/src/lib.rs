//! Semi-supervised anomaly detection with KL-divergence-driven probabilistic
//! labeling.
//!
//! The pipeline scores encoder embeddings with the Local Outlier Factor, fits
//! Burr Type-XII densities to the labeled-normal and unlabeled score
//! populations, turns their KL divergence into a detection probability, and
//! uses the resulting threshold to assign soft labels that drive a
//! hypersphere objective. Everything here is pure computation over `alloc`
//! collections; file formats and the command-line driver live in the `sadkl`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod burr;
pub mod data;
pub mod divergence;
mod error;
pub mod eval;
pub mod lof;
pub mod net;
pub mod sadkl;

pub use error::{Error, Result};

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate-wide generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
