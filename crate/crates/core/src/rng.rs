//! Seeded random streams.
//!
//! Realizations are drawn from one counter-addressed ChaCha stream per
//! location, so the value observed at `(seed, period, location)` does not
//! depend on how many other draws a policy made. Two policies simulated with
//! the same seed therefore see identical supply and demand paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::Realization;
use crate::instance::{DiscreteDistribution, Instance};

/// Mixes a tag into a seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A general purpose generator for policy-internal randomness.
pub fn policy_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}

/// Counter-addressed uniform stream for a set of locations.
#[derive(Debug, Clone)]
pub struct RealizationStream {
    streams: Vec<ChaCha8Rng>,
}

impl RealizationStream {
    pub fn new(seed: u64, locations: usize) -> Self {
        let base = ChaCha8Rng::seed_from_u64(seed);
        let streams = (0..locations)
            .map(|loc| {
                let mut rng = base.clone();
                rng.set_stream(loc as u64);
                rng
            })
            .collect();
        RealizationStream { streams }
    }

    /// Uniform draw in `[0, 1)` addressed by `(period, location)`.
    pub fn uniform(&mut self, period: u64, location: usize) -> f64 {
        let rng = &mut self.streams[location];
        // Each period consumes two 32-bit words (one u64).
        let target = u128::from(period) * 2;
        if rng.get_word_pos() != target {
            rng.set_word_pos(target);
        }
        rng.random::<f64>()
    }

    pub fn sample(&mut self, period: u64, location: usize, dist: &DiscreteDistribution) -> u32 {
        let u = self.uniform(period, location);
        dist.quantile(u)
    }

    /// Full realization for one period of an instance.
    pub fn realization(&mut self, period: u64, inst: &Instance) -> Realization {
        let phi = inst
            .locations
            .iter()
            .enumerate()
            .map(|(loc, l)| self.sample(period, loc, &l.distribution))
            .collect();
        Realization { phi }
    }
}
