use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;

use super::{LmError, NextTokenDistribution, TokenLm};
use crate::codec::TokenId;

/// Memoizes `next_distribution` per context with least-recently-used eviction.
pub struct CachedLm<L> {
    inner: L,
    cache: Mutex<LruCache<Vec<TokenId>, Arc<NextTokenDistribution>>>,
}

impl<L: TokenLm> CachedLm<L> {
    pub fn new(inner: L, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Self { inner, cache: Mutex::new(LruCache::new(cap)) }
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    pub fn cached_contexts(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl<L: TokenLm> TokenLm for CachedLm<L> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Arc<NextTokenDistribution>, LmError> {
        if let Some(hit) = self.cache.lock().unwrap().get(context) {
            return Ok(Arc::clone(hit));
        }
        // computed outside the lock; a racing thread may compute the same entry
        let dist = self.inner.next_distribution(context)?;
        self.cache.lock().unwrap().put(context.to_vec(), Arc::clone(&dist));
        Ok(dist)
    }
}
