//! Deterministic seed derivation for partitioned stochastic work.
//!
//! Simulations split work into independently seeded units (pulse blocks,
//! sweep points). The sub-seed of unit `index` under a master seed is
//!
//! ```text
//! derive_seed(master, index) = splitmix64(master XOR (index + 1) * 0x9E3779B97F4A7C15)
//! ```
//!
//! where `splitmix64` is the finalizer of the SplitMix64 generator. The
//! derivation is part of the output format contract: re-running any unit
//! standalone with its derived seed reproduces it byte for byte.

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the sub-seed of unit `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
