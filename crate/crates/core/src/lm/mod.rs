//! Token-level language models: next-token distributions over the token
//! alphabet plus an end-of-string outcome.

mod cache;
mod external;
mod ngram;
mod table;
pub mod toy;

use std::sync::Arc;

use thiserror::Error;

use crate::codec::TokenId;

pub use cache::CachedLm;
pub use external::{ExternalLm, ExternalLmConfig, ENDPOINT_ENV};
pub use ngram::{perplexity, NGramLm};
pub use table::{ConditionalTableLm, StringTableLm};

/// Tolerance on `|sum p - 1|` for distributions built in-process.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    UnknownToken { id: TokenId, vocab_size: usize },
    #[error("distribution sums to {total}, not 1")]
    Normalization { total: f64 },
    #[error("distribution has {got} entries, vocabulary has {expected}")]
    VocabMismatch { expected: usize, got: usize },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("request timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `p(. | context)` over the vocabulary and EOS, in natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct NextTokenDistribution {
    logprobs: Vec<f64>,
    eos: f64,
}

impl NextTokenDistribution {
    pub fn new(logprobs: Vec<f64>, eos: f64) -> Result<Self, LmError> {
        Self::with_tolerance(logprobs, eos, NORMALIZATION_TOLERANCE)
    }

    pub fn with_tolerance(logprobs: Vec<f64>, eos: f64, tolerance: f64) -> Result<Self, LmError> {
        let bad = |x: f64| x.is_nan() || x == f64::INFINITY;
        if logprobs.iter().copied().any(bad) || bad(eos) {
            return Err(LmError::Malformed("log-probabilities must be finite or -inf".into()));
        }
        let total: f64 = logprobs.iter().map(|x| x.exp()).sum::<f64>() + eos.exp();
        if (total - 1.0).abs() > tolerance {
            return Err(LmError::Normalization { total });
        }
        Ok(Self { logprobs, eos })
    }

    /// Builds from plain probabilities.
    pub fn from_probs(probs: &[f64], eos: f64) -> Result<Self, LmError> {
        Self::new(probs.iter().map(|p| p.ln()).collect(), eos.ln())
    }

    /// All mass on EOS.
    pub fn stop(vocab_size: usize) -> Self {
        Self { logprobs: vec![f64::NEG_INFINITY; vocab_size], eos: 0.0 }
    }

    pub fn uniform(vocab_size: usize) -> Self {
        let lp = -((vocab_size + 1) as f64).ln();
        Self { logprobs: vec![lp; vocab_size], eos: lp }
    }

    pub fn logprob(&self, token: TokenId) -> f64 {
        self.logprobs[token as usize]
    }

    pub fn eos_logprob(&self) -> f64 {
        self.eos
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }
}

/// A language model over token strings.
///
/// Implementations are deterministic per context and shareable across
/// threads.
pub trait TokenLm: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError>;
}

impl<T: TokenLm + ?Sized> TokenLm for &T {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        (**self).next_distribution(context)
    }
}

impl<T: TokenLm + ?Sized> TokenLm for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        (**self).next_distribution(context)
    }
}

impl<T: TokenLm + ?Sized> TokenLm for Arc<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        (**self).next_distribution(context)
    }
}

pub(crate) fn check_tokens(tokens: &[TokenId], vocab_size: usize) -> Result<(), LmError> {
    match tokens.iter().find(|&&t| t as usize >= vocab_size) {
        Some(&id) => Err(LmError::UnknownToken { id, vocab_size }),
        None => Ok(()),
    }
}

/// `ln p(tokens is a prefix)`: the product of conditionals without the EOS factor.
pub fn token_prefix_logprob<L: TokenLm + ?Sized>(lm: &L, tokens: &[TokenId]) -> Result<f64, LmError> {
    check_tokens(tokens, lm.vocab_size())?;
    let mut total = 0.0;
    for t in 0..tokens.len() {
        total += lm.next_distribution(&tokens[..t])?.logprob(tokens[t]);
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// `ln p(tokens)`: the prefix log-probability plus `ln p(EOS | tokens)`.
pub fn token_string_logprob<L: TokenLm + ?Sized>(lm: &L, tokens: &[TokenId]) -> Result<f64, LmError> {
    let prefix = token_prefix_logprob(lm, tokens)?;
    if prefix == f64::NEG_INFINITY {
        return Ok(prefix);
    }
    Ok(prefix + lm.next_distribution(tokens)?.eos_logprob())
}

pub fn token_prefix_prob<L: TokenLm + ?Sized>(lm: &L, tokens: &[TokenId]) -> Result<f64, LmError> {
    token_prefix_logprob(lm, tokens).map(f64::exp)
}

pub fn token_string_prob<L: TokenLm + ?Sized>(lm: &L, tokens: &[TokenId]) -> Result<f64, LmError> {
    token_string_logprob(lm, tokens).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        assert!(matches!(
            NextTokenDistribution::from_probs(&[0.5, 0.3], 0.1),
            Err(LmError::Normalization { .. })
        ));
        assert!(NextTokenDistribution::from_probs(&[0.5, 0.3], 0.2).is_ok());
        assert!(NextTokenDistribution::new(vec![f64::NAN], 0.0).is_err());
    }

    #[test]
    fn prefix_and_string_probs() {
        let mut t = ConditionalTableLm::new(NextTokenDistribution::uniform(2));
        t.insert(vec![], NextTokenDistribution::from_probs(&[0.6, 0.3], 0.1).unwrap());
        assert_eq!(token_prefix_prob(&t, &[]).unwrap(), 1.0);
        assert!((token_prefix_prob(&t, &[0]).unwrap() - 0.6).abs() < 1e-15);
        assert!((token_string_prob(&t, &[]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(token_prefix_prob(&t, &[5]), Err(LmError::UnknownToken { id: 5, .. })));
    }

    #[test]
    fn always_eos_gives_zero() {
        let t = ConditionalTableLm::new(NextTokenDistribution::stop(3));
        assert_eq!(token_string_prob(&t, &[1]).unwrap(), 0.0);
        assert_eq!(token_string_prob(&t, &[]).unwrap(), 1.0);
    }
}
