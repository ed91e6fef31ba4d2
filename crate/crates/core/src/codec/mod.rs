//! Token alphabet with a BPE encoder and a multiplicative decoder.
//!
//! `encode` is the canonical tokenization (merges applied in training
//! order); `decode` concatenates token decodings. Every string over the
//! base alphabet survives `decode(encode(s)) == s`, while the converse
//! does not hold: many token strings decode to the same characters.

mod io;
mod train;
mod trie;

use std::collections::HashMap;

use thiserror::Error;

pub use io::{read_merges, read_vocab, write_merges, write_vocab, MERGES_HEADER, VOCAB_HEADER};
pub use train::train_bpe;
pub use trie::{DecodeTrie, NodeId};

pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("vocab size {vocab_size} is smaller than the {base} distinct corpus characters")]
    VocabTooSmall { vocab_size: usize, base: usize },
    #[error("character {ch:?} at offset {offset} is not in the base alphabet")]
    UnknownChar { ch: char, offset: usize },
    #[error("unknown token id {0}")]
    UnknownToken(TokenId),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Merge {
    pub left: TokenId,
    pub right: TokenId,
}

#[derive(Debug, Clone)]
pub struct Codec {
    decodings: Vec<String>,
    lengths: Vec<usize>,
    ids: HashMap<String, TokenId>,
    base: HashMap<char, TokenId>,
    merges: Vec<Merge>,
    // pair -> (rank, merged token)
    ranks: HashMap<(TokenId, TokenId), (usize, TokenId)>,
    trie: DecodeTrie,
}

impl PartialEq for Codec {
    fn eq(&self, other: &Self) -> bool {
        self.decodings == other.decodings && self.merges == other.merges
    }
}

impl Codec {
    /// Builds a codec from dense token decodings (id = position) and an
    /// ordered merge list.
    pub fn new(decodings: Vec<String>, merges: Vec<Merge>) -> Result<Self, CodecError> {
        let mut ids = HashMap::with_capacity(decodings.len());
        let mut base = HashMap::new();
        for (i, d) in decodings.iter().enumerate() {
            if d.is_empty() {
                return Err(CodecError::InvalidVocab(format!("token {i} has an empty decoding")));
            }
            if ids.insert(d.clone(), i as TokenId).is_some() {
                return Err(CodecError::InvalidVocab(format!("duplicate decoding {d:?}")));
            }
            let mut cs = d.chars();
            if let (Some(c), None) = (cs.next(), cs.next()) {
                base.insert(c, i as TokenId);
            }
        }

        let mut ranks = HashMap::with_capacity(merges.len());
        let mut reachable: Vec<bool> = decodings.iter().map(|d| d.chars().count() == 1).collect();
        for (rank, m) in merges.iter().enumerate() {
            let (l, r) = (m.left as usize, m.right as usize);
            if l >= decodings.len() || r >= decodings.len() {
                return Err(CodecError::InvalidVocab(format!("merge {rank} references an unknown token")));
            }
            if !reachable[l] || !reachable[r] {
                return Err(CodecError::InvalidVocab(format!(
                    "merge {rank} uses a token not produced by an earlier merge"
                )));
            }
            let joined = format!("{}{}", decodings[l], decodings[r]);
            let Some(&out) = ids.get(&joined) else {
                return Err(CodecError::InvalidVocab(format!("merge {rank} yields {joined:?}, which is not a token")));
            };
            if ranks.insert((m.left, m.right), (rank, out)).is_some() {
                return Err(CodecError::InvalidVocab(format!("merge {rank} repeats an earlier pair")));
            }
            reachable[out as usize] = true;
        }

        let lengths = decodings.iter().map(|d| d.chars().count()).collect();
        let trie = DecodeTrie::build(&decodings);
        Ok(Self { decodings, lengths, ids, base, merges, ranks, trie })
    }

    /// A codec with no merges; multi-character tokens are decodable but
    /// never produced by `encode`.
    pub fn from_decodings<S: Into<String>>(decodings: impl IntoIterator<Item = S>) -> Result<Self, CodecError> {
        Self::new(decodings.into_iter().map(Into::into).collect(), Vec::new())
    }

    pub fn vocab_size(&self) -> usize {
        self.decodings.len()
    }

    pub fn decodings(&self) -> &[String] {
        &self.decodings
    }

    pub fn decoding(&self, id: TokenId) -> Result<&str, CodecError> {
        self.decodings.get(id as usize).map(String::as_str).ok_or(CodecError::UnknownToken(id))
    }

    /// Decoding length in characters.
    pub fn token_len(&self, id: TokenId) -> usize {
        self.lengths[id as usize]
    }

    pub fn token_id(&self, decoding: &str) -> Option<TokenId> {
        self.ids.get(decoding).copied()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Single-character tokens, sorted by character.
    pub fn base_alphabet(&self) -> Vec<char> {
        let mut cs: Vec<char> = self.base.keys().copied().collect();
        cs.sort_unstable();
        cs
    }

    /// Every character occurring in some decoding, sorted.
    pub fn character_set(&self) -> Vec<char> {
        let mut cs: Vec<char> = self.decodings.iter().flat_map(|d| d.chars()).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    }

    pub fn trie(&self) -> &DecodeTrie {
        &self.trie
    }

    /// Canonical tokenization of `text`.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>, CodecError> {
        let mut seq = Vec::with_capacity(text.len());
        for (offset, ch) in text.chars().enumerate() {
            match self.base.get(&ch) {
                Some(&id) => seq.push(id),
                None => return Err(CodecError::UnknownChar { ch, offset }),
            }
        }
        loop {
            let best = seq
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&(rank, _)| (rank, (w[0], w[1]))))
                .min();
            let Some((_, pair)) = best else { break };
            let out = self.ranks[&pair].1;
            merge_pair(&mut seq, pair, out);
        }
        Ok(seq)
    }

    pub fn decode(&self, tokens: &[TokenId]) -> Result<String, CodecError> {
        let mut out = String::new();
        for &t in tokens {
            out.push_str(self.decoding(t)?);
        }
        Ok(out)
    }

    /// Splits the vocabulary against a non-empty `remainder`: `inside`
    /// holds tokens whose decoding is a proper prefix of it, `covering`
    /// those whose decoding starts with all of it (equality included).
    pub fn tokens_matching(&self, remainder: &[char]) -> TokenMatches {
        self.trie.matching(remainder)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenMatches {
    pub inside: Vec<TokenId>,
    pub covering: Vec<TokenId>,
}

/// Replaces every left-to-right occurrence of `pair` with `out`.
pub(crate) fn merge_pair(seq: &mut Vec<TokenId>, pair: (TokenId, TokenId), out: TokenId) {
    let mut write = 0;
    let mut read = 0;
    while read < seq.len() {
        if read + 1 < seq.len() && (seq[read], seq[read + 1]) == pair {
            seq[write] = out;
            read += 2;
        } else {
            seq[write] = seq[read];
            read += 1;
        }
        write += 1;
    }
    seq.truncate(write);
}
