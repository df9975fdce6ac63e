//! Seeded random streams.
//!
//! Every Monte-Carlo routine derives its generators from a `(seed, id...)`
//! tuple, so ensembles are reproducible independently of thread count and of
//! the order in which trajectories are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type StreamRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream number `index` of the family identified by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream keyed by `(seed, index, sub)`, e.g. trajectory and time step.
pub fn substream(seed: u64, index: u64, sub: u64) -> StreamRng {
    let mixed = splitmix(splitmix(seed ^ 0x5bd1_e995) ^ sub);
    stream(mixed, index)
}

#[inline]
pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
