//! Seed derivation.
//!
//! Every generated artifact is keyed by a seed derived from a master seed and
//! a structured path (split, index, parameter name ...). Derivation is a
//! SplitMix64 finalizer chain, so results never depend on how work is
//! scheduled across workers.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `word` into `state`.
#[inline]
pub fn combine(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN).wrapping_add(mix64(word)))
}

/// Seed for sample `index` of split `split_tag` under `master`.
pub fn derive_seed(master: u64, split_tag: u64, index: u64) -> u64 {
    combine(combine(mix64(master), split_tag), index)
}

/// FNV-1a over the bytes of `s`, folded into `master`.
pub fn derive_named(master: u64, s: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    combine(mix64(master), h)
}
