//! Deterministic RNG stream derivation.
//!
//! Every random decision in the pipeline flows from one configured seed. Each
//! trajectory (and each pipeline stage) derives an independent ChaCha stream
//! from `(seed, stage label, trip id)`, so per-trip work can be reordered or
//! parallelized without changing any output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over bytes; stable, dependency-free content hashing.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG stream keyed by the master seed plus any number of string labels.
pub fn stream(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    let mut h = seed ^ 0x51_7c_c1_b7_27_22_0a_95;
    for label in labels {
        h = h.wrapping_mul(0x100_0000_01b3) ^ fnv1a64(label.as_bytes());
    }
    let mut state = h;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derive a sub-seed (for stages that thread a plain `u64` seed around).
pub fn sub_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = seed ^ 0x243f_6a88_85a3_08d3;
    for label in labels {
        h = h.wrapping_mul(0x100_0000_01b3) ^ fnv1a64(label.as_bytes());
    }
    let mut state = h;
    splitmix64(&mut state)
}
