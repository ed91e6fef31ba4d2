//! Small synthetic models for tests and oracle checks.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::{check_tokens, LmError, NextTokenDistribution, TokenLm};
use crate::codec::TokenId;

/// A full-support model whose conditionals are a fixed pseudo-random
/// function of `(seed, context)`. Cheap to build and to query, and every
/// token string has positive probability.
#[derive(Debug, Clone)]
pub struct SeededLm {
    vocab_size: usize,
    seed: u64,
    eos_boost: f64,
    sharpness: f64,
}

impl SeededLm {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        Self { vocab_size, seed, eos_boost: 0.0, sharpness: 1.0 }
    }

    /// Adds `boost` to the EOS logit, shortening typical strings.
    pub fn with_eos_boost(mut self, boost: f64) -> Self {
        self.eos_boost = boost;
        self
    }

    /// Scales every logit; large values concentrate each conditional on a
    /// few outcomes.
    pub fn with_sharpness(mut self, sharpness: f64) -> Self {
        self.sharpness = sharpness;
        self
    }
}

fn unit(seed: u64, context: &[TokenId], outcome: u64) -> f64 {
    // FNV-1a over the inputs, then a splitmix finalizer
    let mut h = Fnv(0xcbf29ce484222325);
    seed.hash(&mut h);
    context.hash(&mut h);
    outcome.hash(&mut h);
    let mut z = h.0.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

struct Fnv(u64);

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
}

impl TokenLm for SeededLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        check_tokens(context, self.vocab_size)?;
        let logits: Vec<f64> = (0..=self.vocab_size as u64).map(|o| self.sharpness * (4.0 * unit(self.seed, context, o) - 2.0)).collect();
        let eos_logit = logits[self.vocab_size] + self.eos_boost;
        let max = logits[..self.vocab_size].iter().copied().fold(eos_logit, f64::max);
        let z = logits[..self.vocab_size].iter().map(|l| (l - max).exp()).sum::<f64>() + (eos_logit - max).exp();
        let lz = max + z.ln();
        let logprobs = logits[..self.vocab_size].iter().map(|l| l - lz).collect();
        NextTokenDistribution::new(logprobs, eos_logit - lz).map(Arc::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let lm = SeededLm::new(5, 3).with_eos_boost(1.0);
        let a = lm.next_distribution(&[1, 2]).unwrap();
        let b = lm.next_distribution(&[1, 2]).unwrap();
        assert_eq!(a, b);
        assert_ne!(*a, *lm.next_distribution(&[2, 1]).unwrap());
        assert_ne!(*a, *SeededLm::new(5, 4).next_distribution(&[1, 2]).unwrap());
    }
}
