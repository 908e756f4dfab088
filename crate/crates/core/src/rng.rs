//! Reproducible random streams.
//!
//! Every replication draws from its own ChaCha8 stream selected by the pair
//! (master seed, replication index), so a Monte-Carlo result is identical no
//! matter how replications are distributed over workers. Normal variates come
//! from `rand_distr`'s Ziggurat sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// The generator for replication `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    fill_normal(rng, &mut v);
    v
}

/// Seed drawn from the OS, for commands run without `--seed`.
pub fn fresh_seed() -> u64 {
    rand::rng().random()
}
