//! Incremental beam summing over the tokenization lattice.
//!
//! The scorer consumes a character string left to right. A state is a
//! token string whose decoding is exactly the first `chars_consumed`
//! characters read so far. Before a level is extended, its states are
//! pruned to at most `width`; each survivor then tracks every token it
//! could emit next through a pointer into the decode trie.
//!
//! Pruning is nested across widths. A state is admissible at width `b`
//! once its parent survives at width `b` (its birth width). Survivors at
//! width `b` are the survivors at width `b - 1` plus the most probable
//! admissible state not yet chosen. Plain top-`b` selection lets a wider
//! beam evict a state whose descendants carry most of the mass, so the
//! result can drop as the beam widens; with nested survivors every term
//! summed at width `b` is also summed at width `b + 1`.
//!
//! After reading `n` characters the live (state, trie node) pairs are
//! exactly the prefix cover of the input: the node's subtree holds the
//! tokens whose decoding starts with the characters read since the state
//! ended. Summing their probabilities gives the prefix probability, and
//! states at level `n` give the probability of the string itself.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use crate::codec::{Codec, DecodeTrie, NodeId, TokenId};
use crate::lm::{NextTokenDistribution, TokenLm};
use crate::math::{log_add, log_sum_exp};

use super::MarginalError;

/// A partial tokenization: `tokens` decodes to the first `chars_consumed`
/// characters of the query.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverState {
    pub tokens: Vec<TokenId>,
    pub chars_consumed: usize,
    pub logprob: f64,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    state: usize,
    node: NodeId,
}

pub struct PrefixScorer<'a, L: ?Sized> {
    codec: &'a Codec,
    lm: &'a L,
    width: usize,
    cap: usize,
    states: Vec<CoverState>,
    // smallest width at which the state is admissible / survives
    births: Vec<usize>,
    ranks: Vec<usize>,
    dists: Vec<Option<Arc<NextTokenDistribution>>>,
    // state indices per chars_consumed; only the last level is still open
    levels: Vec<Vec<usize>>,
    items: Vec<Item>,
    read: usize,
}

impl<'a, L: TokenLm + ?Sized> PrefixScorer<'a, L> {
    /// `width` states survive per level; `cap` bounds the total number of
    /// states ever created.
    pub fn new(codec: &'a Codec, lm: &'a L, width: usize, cap: usize) -> Self {
        Self {
            codec,
            lm,
            width: width.max(1),
            cap,
            states: vec![CoverState { tokens: Vec::new(), chars_consumed: 0, logprob: 0.0 }],
            births: vec![1],
            ranks: vec![usize::MAX],
            dists: vec![None],
            levels: vec![vec![0]],
            items: Vec::new(),
            read: 0,
        }
    }

    /// Characters consumed so far.
    pub fn position(&self) -> usize {
        self.read
    }

    pub fn states_created(&self) -> usize {
        self.states.len()
    }

    /// States at `level` (pruned once the level has been extended).
    pub fn level(&self, level: usize) -> impl Iterator<Item = &CoverState> {
        self.levels.get(level).into_iter().flatten().map(|&i| &self.states[i])
    }

    fn dist(&mut self, state: usize) -> Result<Arc<NextTokenDistribution>, MarginalError> {
        if let Some(d) = &self.dists[state] {
            return Ok(Arc::clone(d));
        }
        let d = self.lm.next_distribution(&self.states[state].tokens)?;
        self.dists[state] = Some(Arc::clone(&d));
        Ok(d)
    }

    fn prune(&mut self, level: usize) {
        let states = &self.states;
        let by_score = |a: &usize, b: &usize| {
            states[*b].logprob.total_cmp(&states[*a].logprob).then_with(|| states[*a].tokens.cmp(&states[*b].tokens))
        };
        let mut ids = std::mem::take(&mut self.levels[level]);
        if self.width == usize::MAX {
            ids.sort_by(by_score);
            for (r, &i) in ids.iter().enumerate() {
                self.ranks[i] = r + 1;
            }
            self.levels[level] = ids;
            return;
        }
        ids.sort_by(|a, b| self.births[*a].cmp(&self.births[*b]).then_with(|| by_score(a, b)));
        let mut pending = ids.into_iter().peekable();
        // admissible candidates, best first
        let mut open: BTreeSet<Ranked> = BTreeSet::new();
        let mut kept = Vec::new();
        let mut b = 1;
        while b <= self.width {
            while let Some(&i) = pending.peek() {
                if self.births[i] > b {
                    break;
                }
                open.insert(Ranked { logprob: self.states[i].logprob, tokens: &self.states[i].tokens, id: i });
                pending.next();
            }
            match open.pop_first() {
                Some(r) => {
                    self.ranks[r.id] = b;
                    kept.push(r.id);
                    b += 1;
                }
                None => match pending.peek() {
                    Some(&i) => b = self.births[i],
                    None => break,
                },
            }
        }
        self.levels[level] = kept;
    }

    /// Reads one more character.
    pub fn push(&mut self, c: char) -> Result<(), MarginalError> {
        let level = self.read;
        self.prune(level);
        let survivors = self.levels[level].clone();
        for s in survivors {
            self.dist(s)?;
            self.items.push(Item { state: s, node: DecodeTrie::ROOT });
        }

        let trie = self.codec.trie();
        let mut kept = Vec::with_capacity(self.items.len());
        let mut next_level = Vec::new();
        for item in std::mem::take(&mut self.items) {
            let Some(node) = trie.child(item.node, c) else { continue };
            if let Some(t) = trie.token(node) {
                let parent = &self.states[item.state];
                let lp = parent.logprob + self.dists[item.state].as_ref().unwrap().logprob(t);
                if lp > f64::NEG_INFINITY {
                    if self.states.len() >= self.cap {
                        return Err(MarginalError::Explosion { cap: self.cap });
                    }
                    let mut tokens = parent.tokens.clone();
                    tokens.push(t);
                    self.states.push(CoverState { tokens, chars_consumed: level + 1, logprob: lp });
                    self.births.push(self.ranks[item.state]);
                    self.ranks.push(usize::MAX);
                    self.dists.push(None);
                    next_level.push(self.states.len() - 1);
                }
            }
            kept.push(Item { state: item.state, node });
        }
        self.items = kept;
        self.levels.push(next_level);
        self.read += 1;
        Ok(())
    }

    pub fn push_str(&mut self, s: &str) -> Result<(), MarginalError> {
        for c in s.chars() {
            self.push(c)?;
        }
        Ok(())
    }

    /// `ln` prefix probability of everything read so far.
    pub fn prefix_logprob(&self) -> f64 {
        if self.read == 0 {
            return 0.0;
        }
        let trie = self.codec.trie();
        log_sum_exp(self.items.iter().map(|item| {
            let dist = self.dists[item.state].as_ref().unwrap();
            let mass = log_sum_exp(trie.subtree(item.node).iter().map(|&t| dist.logprob(t)));
            self.states[item.state].logprob + mass
        }))
    }

    /// `ln` probability that the model emits exactly what was read.
    pub fn string_logprob(&mut self) -> Result<f64, MarginalError> {
        let ids = self.levels[self.read].clone();
        let mut acc = f64::NEG_INFINITY;
        for s in ids {
            let d = self.dist(s)?;
            acc = log_add(acc, self.states[s].logprob + d.eos_logprob());
        }
        Ok(acc)
    }
}

struct Ranked<'s> {
    logprob: f64,
    tokens: &'s [TokenId],
    id: usize,
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.logprob.total_cmp(&self.logprob).then_with(|| self.tokens.cmp(other.tokens))
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}
