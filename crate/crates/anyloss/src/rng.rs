//! Seed derivation for independent deterministic RNG streams.
//!
//! Parallel work items (folds, benchmark cells) each own an RNG seeded from
//! `(base seed, stream id)` so results do not depend on scheduling order.

/// Derives a decorrelated seed for stream `stream` from a base seed.
///
/// Uses the splitmix64 finalizer, which maps nearby inputs to
/// statistically independent outputs.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
