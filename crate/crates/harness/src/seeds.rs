//! Deterministic seed derivation.
//!
//! Trial seeds come from SplitMix64 applied to the master seed plus a
//! golden-gamma multiple of the trial index; the increment is odd, so the
//! pre-mix inputs are distinct and the bijective mixer keeps every derived
//! seed distinct.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for trial `trial` of a run keyed by `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    mix(master.wrapping_add((trial + 1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Independent sub-stream of a derived seed (station RNGs, weight inits).
pub fn sub_seed(base: u64, tag: u64) -> u64 {
    mix(base ^ (tag + 1).wrapping_mul(GOLDEN_GAMMA))
}
