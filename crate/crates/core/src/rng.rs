//! Seeded randomness.
//!
//! Every stochastic routine takes a 64-bit seed. Independent consumers (per
//! sample chains, per path simulations) draw from separate ChaCha streams keyed
//! by `(seed, stream)`, so the draws of one chain never depend on how many
//! other chains exist or in which order they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for stream 0 of `seed`.
pub fn seeded(seed: u64) -> Rng {
    stream(seed, 0)
}

/// Generator for an independent stream of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal draw.
pub fn normal(rng: &mut Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Uniform draw on `[0, 1)`.
pub fn uniform(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    rng.random::<f64>()
}

pub fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}
