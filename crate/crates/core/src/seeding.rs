//! Deterministic derivation of per-task seeds from a base seed, so that
//! subjects, replicates and permutations get independent streams whose
//! values do not depend on execution order or thread count.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of stream identifiers into the base seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = mix(base.wrapping_add(GOLDEN_GAMMA));
    for &p in parts {
        state = mix(state.wrapping_add(GOLDEN_GAMMA).wrapping_add(p));
    }
    state
}
