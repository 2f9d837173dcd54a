//! Counter-based randomness for reproducible simulation.
//!
//! Every draw is a pure hash of (seed, step, query, rollout, position), so
//! rollouts can be sampled in any order, or in parallel, without touching
//! the stream any other draw sees. Not cryptographic; stable across
//! platforms.

/// SplitMix64 finalizer; full avalanche on 64 bits.
#[inline]
fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

/// Hash a counter tuple into one 64-bit value.
#[inline]
fn hash_counters(parts: [u64; 5]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for p in parts {
        h = mix64(
            h ^ p
                .wrapping_add(0x9e37_79b9_7f4a_7c15)
                .wrapping_mul(0xff51_afd7_ed55_8ccd),
        );
    }
    h
}

/// Uniform draw in [0, 1) from the top 53 bits of the counter hash.
#[inline]
pub fn counter_uniform(seed: u64, step: u64, query: u64, rollout: u64, position: u64) -> f64 {
    let h = hash_counters([seed, step, query, rollout, position]);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draw source for one training step: all draws are keyed by
/// (query, rollout, position) under a fixed (seed, step).
#[derive(Debug, Clone, Copy)]
pub struct StepRng {
    seed: u64,
    step: u64,
}

impl StepRng {
    pub fn new(seed: u64, step: u64) -> Self {
        Self { seed, step }
    }

    pub fn uniform(&self, query: u64, rollout: u64, position: u64) -> f64 {
        counter_uniform(self.seed, self.step, query, rollout, position)
    }
}
