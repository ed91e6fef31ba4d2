use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{merge_pair, Codec, CodecError, Merge, TokenId};

/// Pairs seen fewer times than this are never merged.
const MIN_PAIR_FREQUENCY: u64 = 2;

/// Learns a BPE vocabulary of at most `vocab_size` tokens.
///
/// Each corpus string is one symbol sequence; whitespace is an ordinary
/// character and merges may span it. Base characters get ids in
/// character order. Every round merges the most frequent adjacent pair,
/// breaking frequency ties by the lexicographically smallest merged
/// string (then the smallest left part). Training stops when the budget
/// is reached or no pair occurs at least twice.
pub fn train_bpe<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<Codec, CodecError> {
    if corpus.is_empty() || corpus.iter().all(|s| s.as_ref().is_empty()) {
        return Err(CodecError::EmptyCorpus);
    }

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for s in corpus {
        *counts.entry(s.as_ref()).or_default() += 1;
    }
    let alphabet: BTreeSet<char> = counts.keys().flat_map(|s| s.chars()).collect();
    if vocab_size < alphabet.len() {
        return Err(CodecError::VocabTooSmall { vocab_size, base: alphabet.len() });
    }

    let mut decodings: Vec<String> = alphabet.iter().map(|c| c.to_string()).collect();
    let mut ids: HashMap<String, TokenId> =
        decodings.iter().enumerate().map(|(i, d)| (d.clone(), i as TokenId)).collect();
    let char_id: HashMap<char, TokenId> = alphabet.iter().enumerate().map(|(i, &c)| (c, i as TokenId)).collect();

    let mut seqs: Vec<(Vec<TokenId>, u64)> = counts
        .iter()
        .filter(|(s, _)| !s.is_empty())
        .map(|(s, &n)| (s.chars().map(|c| char_id[&c]).collect(), n))
        .collect();

    let mut merges = Vec::new();
    while decodings.len() < vocab_size {
        let mut pairs: HashMap<(TokenId, TokenId), u64> = HashMap::new();
        for (seq, n) in &seqs {
            for w in seq.windows(2) {
                *pairs.entry((w[0], w[1])).or_default() += n;
            }
        }
        let best = pairs
            .into_iter()
            .filter(|&(_, f)| f >= MIN_PAIR_FREQUENCY)
            .max_by(|a, b| {
                a.1.cmp(&b.1).then_with(|| {
                    let ka = (joined(&decodings, a.0), &decodings[a.0 .0 as usize]);
                    let kb = (joined(&decodings, b.0), &decodings[b.0 .0 as usize]);
                    kb.cmp(&ka)
                })
            });
        let Some((pair, _)) = best else { break };

        let text = joined(&decodings, pair);
        let out = match ids.get(&text) {
            Some(&id) => id,
            None => {
                let id = decodings.len() as TokenId;
                ids.insert(text.clone(), id);
                decodings.push(text);
                id
            }
        };
        merges.push(Merge { left: pair.0, right: pair.1 });
        for (seq, _) in &mut seqs {
            merge_pair(seq, pair, out);
        }
    }

    Codec::new(decodings, merges)
}

fn joined(decodings: &[String], (l, r): (TokenId, TokenId)) -> String {
    let mut s = decodings[l as usize].clone();
    s.push_str(&decodings[r as usize]);
    s
}
