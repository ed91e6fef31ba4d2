use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_tokens, token_string_logprob, LmError, NextTokenDistribution, TokenLm};
use crate::codec::TokenId;

/// Left padding symbol for contexts near the start of a string.
const BOS: TokenId = TokenId::MAX;
const FORMAT: &str = "charsurp-ngram";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    // outcome id -> count; EOS is `vocab_size`
    next: HashMap<TokenId, u64>,
}

/// Additively smoothed token n-gram model with backoff to the longest
/// context suffix observed in training.
///
/// `p(x | ctx) = (c(ctx', x) + λ) / (c(ctx') + λ (V + 1))` where `ctx'` is
/// the longest suffix of the last `order - 1` tokens (left-padded with a
/// start symbol) that occurred as a context. EOS counts as outcome `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    smoothing: f64,
    vocab_size: usize,
    tables: HashMap<Vec<TokenId>, Counts>,
}

impl NGramLm {
    pub fn train(corpus: &[Vec<TokenId>], vocab_size: usize, order: usize, smoothing: f64) -> Result<Self, LmError> {
        if order < 1 {
            return Err(LmError::InvalidParameter(format!("order must be >= 1, got {order}")));
        }
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(LmError::InvalidParameter(format!("smoothing must be > 0, got {smoothing}")));
        }
        if corpus.is_empty() {
            return Err(LmError::InvalidParameter("empty training corpus".into()));
        }
        let eos = vocab_size as TokenId;
        let mut tables: HashMap<Vec<TokenId>, Counts> = HashMap::new();
        for seq in corpus {
            check_tokens(seq, vocab_size)?;
            let mut padded = vec![BOS; order - 1];
            padded.extend_from_slice(seq);
            for t in 0..=seq.len() {
                let outcome = if t < seq.len() { seq[t] } else { eos };
                let end = t + order - 1;
                for k in 0..order {
                    let entry = tables.entry(padded[end - k..end].to_vec()).or_default();
                    entry.total += 1;
                    *entry.next.entry(outcome).or_default() += 1;
                }
            }
        }
        Ok(Self { order, smoothing, vocab_size, tables })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn backoff<'a>(&'a self, padded: &[TokenId]) -> &'a Counts {
        let ctx = &padded[padded.len() - (self.order - 1)..];
        (0..self.order)
            .rev()
            .find_map(|k| self.tables.get(&ctx[ctx.len() - k..]))
            .expect("empty context is always counted")
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), LmError> {
        let mut contexts: Vec<ContextRecord> = self
            .tables
            .iter()
            .map(|(ctx, c)| ContextRecord {
                context: ctx.clone(),
                counts: c.next.iter().map(|(&k, &v)| (k, v)).collect::<BTreeMap<_, _>>().into_iter().collect(),
            })
            .collect();
        contexts.sort_by(|a, b| a.context.cmp(&b.context));
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            order: self.order,
            smoothing: self.smoothing,
            vocab_size: self.vocab_size,
            contexts,
        };
        serde_json::to_writer(w, &file).map_err(|e| LmError::Format(e.to_string()))
    }

    pub fn load<R: Read>(r: R) -> Result<Self, LmError> {
        let file: ModelFile = serde_json::from_reader(r).map_err(|e| LmError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(LmError::Format(format!("unsupported model {} v{}", file.format, file.version)));
        }
        if file.order < 1 || !(file.smoothing > 0.0) {
            return Err(LmError::Format("bad order or smoothing".into()));
        }
        let mut tables = HashMap::with_capacity(file.contexts.len());
        for rec in file.contexts {
            if rec.context.len() >= file.order {
                return Err(LmError::Format(format!("context {:?} longer than order - 1", rec.context)));
            }
            let mut counts = Counts::default();
            for (k, v) in rec.counts {
                if k as usize > file.vocab_size {
                    return Err(LmError::Format(format!("outcome {k} outside vocabulary")));
                }
                counts.total += v;
                counts.next.insert(k, v);
            }
            tables.insert(rec.context, counts);
        }
        if !tables.contains_key(&Vec::new()) {
            return Err(LmError::Format("missing unigram table".into()));
        }
        Ok(Self { order: file.order, smoothing: file.smoothing, vocab_size: file.vocab_size, tables })
    }
}

impl TokenLm for NGramLm {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        check_tokens(context, self.vocab_size)?;
        let keep = context.len().min(self.order - 1);
        let mut padded = vec![BOS; self.order - 1 - keep];
        padded.extend_from_slice(&context[context.len() - keep..]);
        let counts = self.backoff(&padded);

        let denom = (counts.total as f64 + self.smoothing * (self.vocab_size + 1) as f64).ln();
        let lp = |id: TokenId| (counts.next.get(&id).copied().unwrap_or(0) as f64 + self.smoothing).ln() - denom;
        let logprobs = (0..self.vocab_size as TokenId).map(lp).collect();
        let eos = lp(self.vocab_size as TokenId);
        NextTokenDistribution::new(logprobs, eos).map(Arc::new)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    smoothing: f64,
    vocab_size: usize,
    contexts: Vec<ContextRecord>,
}

#[derive(Serialize, Deserialize)]
struct ContextRecord {
    context: Vec<TokenId>,
    counts: Vec<(TokenId, u64)>,
}

/// Per-outcome perplexity, EOS included: `exp(-sum ln p(s) / sum (|s| + 1))`.
pub fn perplexity<L: TokenLm + ?Sized>(lm: &L, strings: &[Vec<TokenId>]) -> Result<f64, LmError> {
    let mut nll = 0.0;
    let mut n = 0usize;
    for s in strings {
        nll -= token_string_logprob(lm, s)?;
        n += s.len() + 1;
    }
    if n == 0 {
        return Err(LmError::InvalidParameter("perplexity of an empty set".into()));
    }
    Ok((nll / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{token_prefix_prob, token_string_prob};

    fn probs(d: &NextTokenDistribution) -> Vec<f64> {
        d.logprobs().iter().map(|x| x.exp()).chain([d.eos_logprob().exp()]).collect()
    }

    #[test]
    fn unigram_hand_counts() {
        // counts a:2 EOS:2, total 4, V = 1 -> (2 + 1) / (4 + 2)
        let lm = NGramLm::train(&[vec![0], vec![0]], 1, 1, 1.0).unwrap();
        let p = probs(&lm.next_distribution(&[]).unwrap());
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert!((token_prefix_prob(&lm, &[0, 0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((token_string_prob(&lm, &[0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bigram_hand_counts_and_backoff() {
        // V = 3, token 2 never occurs.
        // [BOS]: 0 x2 (total 2); [0]: 1, EOS (total 2); []: 0 x2, 1, EOS x2 (total 5)
        let lm = NGramLm::train(&[vec![0, 1], vec![0]], 3, 2, 1.0).unwrap();
        let p = probs(&lm.next_distribution(&[]).unwrap());
        let want = [3.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = probs(&lm.next_distribution(&[1, 0]).unwrap());
        let want = [1.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        // unseen context [2] backs off to the unigram table: (c + 1) / (5 + 4)
        let p = probs(&lm.next_distribution(&[2]).unwrap());
        let want = [3.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0, 3.0 / 9.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn every_context_normalizes() {
        let corpus = vec![vec![0, 1, 2, 1], vec![2, 2], vec![1]];
        let lm = NGramLm::train(&corpus, 4, 3, 0.5).unwrap();
        for ctx in [vec![], vec![3], vec![0, 1], vec![3, 3, 3], vec![1, 2, 1]] {
            let total: f64 = probs(&lm.next_distribution(&ctx).unwrap()).iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(NGramLm::train(&[vec![0]], 1, 0, 1.0), Err(LmError::InvalidParameter(_))));
        assert!(matches!(NGramLm::train(&[vec![0]], 1, 2, 0.0), Err(LmError::InvalidParameter(_))));
        assert!(matches!(NGramLm::train(&[], 1, 2, 1.0), Err(LmError::InvalidParameter(_))));
        assert!(matches!(NGramLm::train(&[vec![4]], 1, 2, 1.0), Err(LmError::UnknownToken { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let lm = NGramLm::train(&[vec![0, 1, 2], vec![2, 1]], 3, 3, 0.1).unwrap();
        let mut buf = Vec::new();
        lm.save(&mut buf).unwrap();
        let back = NGramLm::load(&buf[..]).unwrap();
        assert_eq!(back, lm);
        let mut again = Vec::new();
        back.save(&mut again).unwrap();
        assert_eq!(buf, again);
        assert!(NGramLm::load(&b"{\"format\":\"x\"}"[..]).is_err());
    }

    #[test]
    fn perplexity_hand_computed() {
        // unigram on [[0],[0]]: every outcome has probability 1/2
        let lm = NGramLm::train(&[vec![0], vec![0]], 1, 1, 1.0).unwrap();
        assert!((perplexity(&lm, &[vec![0, 0]]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tail_bound_properness() {
        // Sum p(s) over all strings up to length L; the remainder is the
        // probability of not stopping within L steps.
        let lm = NGramLm::train(&[vec![0, 1], vec![1, 1, 0], vec![0]], 2, 2, 1.0).unwrap();
        let max_len = 8;
        let mut total = 0.0;
        let mut min_eos: f64 = 1.0;
        let mut frontier: Vec<Vec<TokenId>> = vec![vec![]];
        for _ in 0..=max_len {
            let mut next = Vec::new();
            for s in &frontier {
                total += token_string_prob(&lm, s).unwrap();
                min_eos = min_eos.min(lm.next_distribution(s).unwrap().eos_logprob().exp());
                for t in 0..2 {
                    let mut e = s.clone();
                    e.push(t);
                    next.push(e);
                }
            }
            frontier = next;
        }
        let bound = (1.0 - min_eos).powi(max_len + 1);
        assert!(total <= 1.0 + 1e-12);
        assert!(1.0 - total <= bound + 1e-12, "{} > {}", 1.0 - total, bound);
    }
}
