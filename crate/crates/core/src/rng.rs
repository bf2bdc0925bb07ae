//! Seeded random-number streams.
//!
//! All stochastic code in this crate draws from ChaCha8 streams created
//! here. A run is identified by a single user-visible `seed`; independent
//! trajectories or Monte Carlo samples within the run get disjoint
//! substreams selected by index. Substreams are independent by construction
//! (distinct ChaCha stream counters), so work can be split across threads
//! in any order without changing any draw.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete RNG used everywhere in the crate.
pub type Stream = ChaCha8Rng;

/// RNG substream `index` of the run identified by `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exponential waiting time with the given rate (events per ns).
///
/// Uses 1 - U so the argument to `ln` is in (0, 1]; the result is always
/// finite and nonnegative. `rate` must be positive.
pub(crate) fn exp_wait(rng: &mut Stream, rate: f64) -> f64 {
    use rand::Rng;
    let u: f64 = 1.0 - rng.random::<f64>();
    -u.ln() / rate
}
