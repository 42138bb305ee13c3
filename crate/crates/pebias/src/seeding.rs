//! Deterministic seed derivation. Every stage of a pipeline draws from its
//! own stream, keyed by (master seed, setting index, seed index, stage
//! label), so stages and parallel cells never share randomness.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; full-avalanche 64-bit mixing.
pub fn mix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold `extra` into `seed`.
pub fn derive(seed: u64, extra: u64) -> u64 {
    mix64(seed ^ extra.wrapping_mul(GOLDEN_GAMMA))
}

/// Fold a textual stage label into `seed`, byte by byte.
pub fn derive_labeled(seed: u64, label: &str) -> u64 {
    let mut h = mix64(seed);
    for b in label.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    h
}

/// Stage seed for one (setting, seed repetition, stage) cell of an
/// experiment. Changing any input changes the output.
pub fn resolve_seed(master_seed: u64, setting_index: usize, seed_index: usize, stage: &str) -> u64 {
    let mut h = mix64(master_seed);
    h = derive(h, setting_index as u64);
    h = derive(h, seed_index as u64);
    derive_labeled(h, stage)
}
