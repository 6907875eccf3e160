//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha stream derived from the
//! run seed, so perturbing one component (say, k-means seeding) leaves the
//! others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Sampling = 3,
    KMeans = 4,
    Synth = 5,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
