//! Seeded random streams and the primitive samplers built on them.
//!
//! The generator is ChaCha8 seeded through `SeedableRng::seed_from_u64`.
//! Every derived quantity is computed here from raw 64-bit words rather
//! than through `rand`'s distribution code, so output streams depend only
//! on the ChaCha keystream and stay fixed across dependency upgrades.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::gf2::BitVector;

/// Single-owner deterministic random stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `id` under the same seed.
    pub fn substream(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        RandomStream { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Offset into the keystream, in 32-bit words.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Uniform element of F₂^m.
pub fn sample_uniform(m: usize, rng: &mut RandomStream) -> BitVector {
    let words = (0..m.div_ceil(64)).map(|_| rng.next_u64()).collect();
    BitVector::from_words(m, words)
}

/// Returns 1 with probability `prob_one`.
pub fn sample_bernoulli(prob_one: f64, rng: &mut RandomStream) -> Result<bool, Error> {
    if !(0.0..=1.0).contains(&prob_one) {
        return Err(Error::ProbabilityOutOfRange(prob_one.to_string()));
    }
    Ok(bernoulli_unchecked(prob_one, rng))
}

pub(crate) fn bernoulli_unchecked(prob_one: f64, rng: &mut RandomStream) -> bool {
    rng.next_f64() < prob_one
}

/// Inverse-CDF sampler over a finite table of weights.
#[derive(Clone, Debug)]
pub struct TableSampler {
    cdf: Vec<f64>,
}

impl TableSampler {
    /// `weights` must be non-negative with positive total; they are normalized.
    pub fn new(weights: &[f64]) -> Result<Self, Error> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty table".into()));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidDistribution(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(TableSampler { cdf })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Index `i` with probability proportional to `weights[i]`.
    pub fn sample(&self, rng: &mut RandomStream) -> usize {
        let x = rng.next_f64();
        // First index whose cdf exceeds x; zero-weight cells share the cdf
        // value of their predecessor and are never selected.
        let idx = self.cdf.partition_point(|&c| c <= x);
        if idx < self.cdf.len() {
            return idx;
        }
        // Rounding left the final cdf entry below x: take the last positive cell.
        (0..self.cdf.len())
            .rev()
            .find(|&i| self.cdf[i] > if i == 0 { 0.0 } else { self.cdf[i - 1] })
            .unwrap_or(0)
    }
}
