//! Deterministic substreams for simulator randomness.
//!
//! Every stochastic step seeds its own `ChaCha8Rng` from a hash of
//! `(master seed, stream tag, entity ids)`. A seeker's draws therefore do
//! not depend on how many other seekers ran first, which is what lets
//! generation run in parallel while reproducing the sequential output
//! bit for bit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_VACANCIES: u64 = 1;
pub(crate) const TAG_SEEKER: u64 = 2;
pub(crate) const TAG_ASSIGN: u64 = 3;
pub(crate) const TAG_EXPERIMENT: u64 = 4;
pub(crate) const TAG_SCORE: u64 = 5;
pub(crate) const TAG_NOISE: u64 = 6;
pub(crate) const TAG_SPELL: u64 = 7;
pub(crate) const TAG_BOOTSTRAP: u64 = 8;
pub(crate) const TAG_SPLIT: u64 = 9;
pub(crate) const TAG_TRAIN: u64 = 10;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer; spreads nearby inputs across the word.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    mix(state.wrapping_add(GOLDEN) ^ mix(word.wrapping_add(GOLDEN)))
}

/// Derives an independent generator for one entity of one stream kind.
pub(crate) fn substream(master_seed: u64, tag: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut state = absorb(mix(master_seed), tag);
    for &id in ids {
        state = absorb(state, id);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = mix(state.wrapping_add(GOLDEN));
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

pub(crate) fn draw_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Centered logistic draw with the given scale, by inverse CDF.
pub(crate) fn draw_logistic(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    sigma * (u / (1.0 - u)).ln()
}
