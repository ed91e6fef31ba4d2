//! Exhaustive enumeration of prefix covers and complete tokenizations.
//!
//! Depth-first over the tokenization lattice with no pruning. Used as the
//! reference for the beam scorer and for short queries in exact mode.

use crate::codec::{Codec, TokenId};
use crate::lm::TokenLm;
use crate::math::log_add;

use super::MarginalError;

struct Walk<'a, L: ?Sized> {
    codec: &'a Codec,
    lm: &'a L,
    text: &'a [char],
    cap: usize,
    visited: usize,
}

impl<L: TokenLm + ?Sized> Walk<'_, L> {
    fn visit(&mut self) -> Result<(), MarginalError> {
        self.visited += 1;
        if self.visited > self.cap {
            return Err(MarginalError::Explosion { cap: self.cap });
        }
        Ok(())
    }
}

/// Every token string `d'·d` with `decode(d')` a proper prefix of `text`
/// and `text` a prefix of `decode(d'·d)`; `{ε}` for the empty string.
pub fn prefix_cover(codec: &Codec, text: &str, cap: usize) -> Result<Vec<Vec<TokenId>>, MarginalError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Ok(vec![Vec::new()]);
    }
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<TokenId>, usize)> = vec![(Vec::new(), 0)];
    let mut visited = 0usize;
    while let Some((tokens, pos)) = stack.pop() {
        visited += 1;
        if visited > cap {
            return Err(MarginalError::Explosion { cap });
        }
        let m = codec.tokens_matching(&chars[pos..]);
        for &t in &m.covering {
            let mut c = tokens.clone();
            c.push(t);
            out.push(c);
        }
        for &t in m.inside.iter().rev() {
            let mut c = tokens.clone();
            c.push(t);
            stack.push((c, pos + codec.token_len(t)));
        }
    }
    out.sort();
    Ok(out)
}

/// `ln` of the character prefix probability: the sum of token prefix
/// probabilities over the prefix cover.
pub fn prefix_logprob<L: TokenLm + ?Sized>(codec: &Codec, lm: &L, text: &str, cap: usize) -> Result<f64, MarginalError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Ok(0.0);
    }
    let mut walk = Walk { codec, lm, text: &chars, cap, visited: 0 };
    let mut tokens = Vec::new();
    cover_dfs(&mut walk, &mut tokens, 0, 0.0)
}

fn cover_dfs<L: TokenLm + ?Sized>(
    w: &mut Walk<'_, L>,
    tokens: &mut Vec<TokenId>,
    pos: usize,
    lp: f64,
) -> Result<f64, MarginalError> {
    w.visit()?;
    let dist = w.lm.next_distribution(tokens)?;
    let m = w.codec.tokens_matching(&w.text[pos..]);
    let mut acc = f64::NEG_INFINITY;
    for &t in &m.covering {
        acc = log_add(acc, lp + dist.logprob(t));
    }
    for &t in &m.inside {
        let next = lp + dist.logprob(t);
        if next == f64::NEG_INFINITY {
            continue;
        }
        tokens.push(t);
        let sub = cover_dfs(w, tokens, pos + w.codec.token_len(t), next);
        tokens.pop();
        acc = log_add(acc, sub?);
    }
    Ok(acc)
}

/// `ln` of the probability that the model emits exactly `text`, summed
/// over every tokenization that decodes to it.
pub fn string_logprob<L: TokenLm + ?Sized>(codec: &Codec, lm: &L, text: &str, cap: usize) -> Result<f64, MarginalError> {
    let chars: Vec<char> = text.chars().collect();
    let mut walk = Walk { codec, lm, text: &chars, cap, visited: 0 };
    let mut tokens = Vec::new();
    full_dfs(&mut walk, &mut tokens, 0, 0.0)
}

fn full_dfs<L: TokenLm + ?Sized>(
    w: &mut Walk<'_, L>,
    tokens: &mut Vec<TokenId>,
    pos: usize,
    lp: f64,
) -> Result<f64, MarginalError> {
    w.visit()?;
    let dist = w.lm.next_distribution(tokens)?;
    if pos == w.text.len() {
        return Ok(lp + dist.eos_logprob());
    }
    let m = w.codec.tokens_matching(&w.text[pos..]);
    let exact = m.covering.iter().copied().filter(|&t| w.codec.token_len(t) == w.text.len() - pos);
    let mut acc = f64::NEG_INFINITY;
    for t in m.inside.iter().copied().chain(exact) {
        let next = lp + dist.logprob(t);
        if next == f64::NEG_INFINITY {
            continue;
        }
        tokens.push(t);
        let sub = full_dfs(w, tokens, pos + w.codec.token_len(t), next);
        tokens.pop();
        acc = log_add(acc, sub?);
    }
    Ok(acc)
}
