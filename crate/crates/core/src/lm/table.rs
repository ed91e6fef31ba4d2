use std::collections::HashMap;
use std::sync::Arc;

use super::{check_tokens, LmError, NextTokenDistribution, TokenLm, NORMALIZATION_TOLERANCE};
use crate::codec::TokenId;

/// A model given by explicit probabilities of complete token strings.
///
/// Conditionals are ratios of prefix masses, so `token_string_prob`
/// reproduces the table. Contexts with no mass stop immediately.
#[derive(Debug, Clone)]
pub struct StringTableLm {
    vocab_size: usize,
    strings: HashMap<Vec<TokenId>, f64>,
    prefixes: HashMap<Vec<TokenId>, f64>,
}

impl StringTableLm {
    pub fn new(vocab_size: usize, table: impl IntoIterator<Item = (Vec<TokenId>, f64)>) -> Result<Self, LmError> {
        let mut strings: HashMap<Vec<TokenId>, f64> = HashMap::new();
        let mut prefixes: HashMap<Vec<TokenId>, f64> = HashMap::new();
        for (s, p) in table {
            check_tokens(&s, vocab_size)?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(LmError::InvalidParameter(format!("probability {p} for {s:?}")));
            }
            for end in 0..=s.len() {
                *prefixes.entry(s[..end].to_vec()).or_default() += p;
            }
            *strings.entry(s).or_default() += p;
        }
        let total: f64 = strings.values().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(LmError::Normalization { total });
        }
        Ok(Self { vocab_size, strings, prefixes })
    }

    pub fn support(&self) -> impl Iterator<Item = (&Vec<TokenId>, f64)> {
        self.strings.iter().map(|(s, &p)| (s, p))
    }
}

impl TokenLm for StringTableLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        check_tokens(context, self.vocab_size)?;
        let mass = self.prefixes.get(context).copied().unwrap_or(0.0);
        if mass <= 0.0 {
            return Ok(Arc::new(NextTokenDistribution::stop(self.vocab_size)));
        }
        let mut ext = context.to_vec();
        ext.push(0);
        let mut logprobs = Vec::with_capacity(self.vocab_size);
        for t in 0..self.vocab_size as TokenId {
            *ext.last_mut().unwrap() = t;
            logprobs.push((self.prefixes.get(&ext).copied().unwrap_or(0.0) / mass).ln());
        }
        let eos = (self.strings.get(context).copied().unwrap_or(0.0) / mass).ln();
        NextTokenDistribution::new(logprobs, eos).map(Arc::new)
    }
}

/// Explicit conditionals per context with a fallback distribution.
#[derive(Debug, Clone)]
pub struct ConditionalTableLm {
    vocab_size: usize,
    default: Arc<NextTokenDistribution>,
    table: HashMap<Vec<TokenId>, Arc<NextTokenDistribution>>,
}

impl ConditionalTableLm {
    pub fn new(default: NextTokenDistribution) -> Self {
        Self { vocab_size: default.len(), default: Arc::new(default), table: HashMap::new() }
    }

    pub fn insert(&mut self, context: Vec<TokenId>, dist: NextTokenDistribution) {
        assert_eq!(dist.len(), self.vocab_size, "distribution size must match vocabulary");
        self.table.insert(context, Arc::new(dist));
    }
}

impl TokenLm for ConditionalTableLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        check_tokens(context, self.vocab_size)?;
        Ok(Arc::clone(self.table.get(context).unwrap_or(&self.default)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::token_string_prob;

    #[test]
    fn string_table_round_trip() {
        let table = vec![(vec![], 0.1), (vec![0], 0.2), (vec![0, 1], 0.3), (vec![1, 1, 0], 0.4)];
        let lm = StringTableLm::new(2, table.clone()).unwrap();
        for (s, p) in &table {
            assert!((token_string_prob(&lm, s).unwrap() - p).abs() < 1e-15);
        }
        assert_eq!(token_string_prob(&lm, &[1]).unwrap(), 0.0);
        assert_eq!(token_string_prob(&lm, &[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn string_table_rejects_bad_mass() {
        assert!(StringTableLm::new(1, vec![(vec![0], 0.5)]).is_err());
        assert!(StringTableLm::new(1, vec![(vec![3], 1.0)]).is_err());
    }
}
