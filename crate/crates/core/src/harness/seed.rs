//! Per-cell seed derivation.
//!
//! Every random draw in an experiment is seeded by
//! `mix_seed(base_seed, &[stream, n, m, trial, ...])`, where `mix_seed` folds
//! each word into a SplitMix64 state:
//!
//! ```text
//! s = splitmix64(base)
//! for w in words: s = splitmix64(s ^ splitmix64(w + 0x9E3779B97F4A7C15))
//! ```
//!
//! A single cell can therefore be re-run in isolation and reproduce its row.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const STREAM_NORM_TABLE: u64 = 1;
pub const STREAM_PHASE_TRANSITION: u64 = 2;
pub const STREAM_NOISE_SWEEP: u64 = 3;
pub const STREAM_NOISE: u64 = 4;
pub const STREAM_INSTANCE: u64 = 5;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix_seed(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(base), |s, &w| splitmix64(s ^ splitmix64(w.wrapping_add(GOLDEN))))
}
