//! Deterministic seed derivation.
//!
//! Every stochastic component in the crate draws its randomness from a
//! `u64` master seed through [`derive`], which hands out statistically
//! independent sub-seeds for numbered streams (ensemble members, series
//! slots, replications). Because each sub-seed depends only on
//! `(master, index)`, adding or removing one stream never perturbs the
//! others — decomposing a series with three exogenous companions yields
//! bit-identical output for the dependent series as decomposing it alone.

/// Weyl-sequence increment from the splitmix64 generator.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: bijective avalanche mix of a 64-bit word.
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the sub-seed for stream `index` under `master`.
///
/// Equivalent to taking the `index`-th output of a splitmix64 generator
/// seeded at `master`; consecutive indices produce uncorrelated seeds.
pub fn derive(master: u64, index: u64) -> u64 {
    finalize(master.wrapping_add(GAMMA.wrapping_mul(index.wrapping_add(1))))
}
