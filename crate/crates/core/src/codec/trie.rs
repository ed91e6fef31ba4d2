use std::collections::BTreeMap;

use super::{TokenId, TokenMatches};

pub type NodeId = usize;

#[derive(Debug, Clone, Default)]
struct Node {
    children: BTreeMap<char, NodeId>,
    token: Option<TokenId>,
    // every token at or below this node, ascending
    subtree: Vec<TokenId>,
}

/// Prefix tree over token decodings.
#[derive(Debug, Clone)]
pub struct DecodeTrie {
    nodes: Vec<Node>,
}

impl DecodeTrie {
    pub const ROOT: NodeId = 0;

    pub fn build(decodings: &[String]) -> Self {
        let mut nodes = vec![Node::default()];
        for (id, d) in decodings.iter().enumerate() {
            let id = id as TokenId;
            let mut cur = Self::ROOT;
            nodes[cur].subtree.push(id);
            for c in d.chars() {
                cur = match nodes[cur].children.get(&c) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[cur].children.insert(c, next);
                        next
                    }
                };
                nodes[cur].subtree.push(id);
            }
            nodes[cur].token = Some(id);
        }
        Self { nodes }
    }

    pub fn child(&self, node: NodeId, c: char) -> Option<NodeId> {
        self.nodes[node].children.get(&c).copied()
    }

    /// Token whose decoding ends exactly at `node`.
    pub fn token(&self, node: NodeId) -> Option<TokenId> {
        self.nodes[node].token
    }

    /// Tokens whose decoding passes through `node`.
    pub fn subtree(&self, node: NodeId) -> &[TokenId] {
        &self.nodes[node].subtree
    }

    pub fn lookup(&self, s: &str) -> Option<TokenId> {
        let mut cur = Self::ROOT;
        for c in s.chars() {
            cur = self.child(cur, c)?;
        }
        self.token(cur)
    }

    pub fn matching(&self, remainder: &[char]) -> TokenMatches {
        let mut out = TokenMatches::default();
        let mut cur = Self::ROOT;
        for (depth, &c) in remainder.iter().enumerate() {
            if depth > 0 {
                if let Some(t) = self.token(cur) {
                    out.inside.push(t);
                }
            }
            match self.child(cur, c) {
                Some(next) => cur = next,
                None => return out,
            }
        }
        if !remainder.is_empty() {
            out.covering = self.subtree(cur).to_vec();
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matching_agrees_with_brute_force(
            vocab in proptest::collection::btree_set("[ab ]{1,4}", 1..12),
            rem in "[ab ]{1,6}",
        ) {
            let decodings: Vec<String> = vocab.into_iter().collect();
            let trie = DecodeTrie::build(&decodings);
            let rem_chars: Vec<char> = rem.chars().collect();
            let m = trie.matching(&rem_chars);
            for (id, d) in decodings.iter().enumerate() {
                let id = id as TokenId;
                let inside = rem.starts_with(d.as_str()) && d.len() < rem.len();
                let covering = d.starts_with(rem.as_str());
                prop_assert_eq!(m.inside.contains(&id), inside, "inside {:?} vs {:?}", d, rem);
                prop_assert_eq!(m.covering.contains(&id), covering, "covering {:?} vs {:?}", d, rem);
            }
            for (id, d) in decodings.iter().enumerate() {
                prop_assert_eq!(trie.lookup(d), Some(id as TokenId));
            }
        }
    }
}
