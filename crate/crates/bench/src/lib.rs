//! Shared fixtures for the benchmarks.

use qcorr_core::{sample, ClassicalDistribution, PureState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pure(dims: &[usize], seed: u64) -> PureState {
    sample::random_pure(dims, &mut rng(seed))
}

/// `P(x, y) = 1/d` on the diagonal.
pub fn correlated(d: usize) -> ClassicalDistribution {
    let mut p = vec![0.0; d * d];
    (0..d).for_each(|i| p[i * d + i] = 1.0);
    ClassicalDistribution::normalized(vec![d, d], p).unwrap()
}
