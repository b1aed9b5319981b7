//! Deterministic random substream derivation.
//!
//! Every stochastic component draws from a ChaCha stream derived from the
//! master seed plus a list of integer tags (purpose, MCMC iteration, time
//! index, particle index). Two calls with the same tags yield the same
//! stream, so results are bit-reproducible regardless of how work is
//! scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Kept in one place so no two call sites collide.
pub mod purpose {
    pub const CHAIN: u64 = 1;
    pub const FILTER_PROPAGATE: u64 = 2;
    pub const FILTER_RESAMPLE: u64 = 3;
    pub const DATA_GEN: u64 = 4;
    pub const PILOT_TUNE: u64 = 5;
    pub const SIMULATE: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent generator from a master seed and a tag list.
pub fn substream(master_seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(master_seed);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    let mut seed = [0u8; 32];
    let mut s = h;
    for chunk in seed.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
