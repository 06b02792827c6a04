//! Seeded demand generation.

use adrf_core::{Quantity, ResourceVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SimError;

/// Recorded in trace headers so other implementations can reproduce the draws.
pub const GENERATOR_ID: &str = "chacha8-rand0.8-uniform-inclusive";

/// Stream of demand vectors with components drawn i.i.d. uniform on `low..=high`.
pub struct DemandSampler {
    rng: ChaCha8Rng,
    low: Quantity,
    high: Quantity,
}

impl DemandSampler {
    pub fn new(seed: u64, low: Quantity, high: Quantity) -> Result<Self, SimError> {
        if low > high {
            return Err(SimError::InvalidConfig(format!(
                "demand range {low}:{high} is empty"
            )));
        }
        Ok(DemandSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            low,
            high,
        })
    }

    pub fn next_vector(&mut self, m: usize) -> Result<ResourceVector, SimError> {
        let quantities = (0..m)
            .map(|_| self.rng.gen_range(self.low..=self.high))
            .collect();
        Ok(ResourceVector::new(quantities)?)
    }

    pub fn next_batch(&mut self, n: usize, m: usize) -> Result<Vec<ResourceVector>, SimError> {
        (0..n).map(|_| self.next_vector(m)).collect()
    }
}

/// `n` vectors of `m` components from a fresh generator seeded with `seed`.
pub fn gen_demands(
    n: usize,
    m: usize,
    low: Quantity,
    high: Quantity,
    seed: u64,
) -> Result<Vec<ResourceVector>, SimError> {
    DemandSampler::new(seed, low, high)?.next_batch(n, m)
}
