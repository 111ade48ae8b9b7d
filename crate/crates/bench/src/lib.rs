//! Shared helpers for the benchmark targets.

use delcap::bitstring::{BitChannelSpec, EmbeddingCache};

/// Build a channel and its embedding cache with a generous budget.
pub fn channel_with_cache(n: u32, k: u32) -> (BitChannelSpec, EmbeddingCache) {
    let ch = BitChannelSpec::new(n, k).expect("valid channel");
    let cache = EmbeddingCache::build(ch, 1 << 32).expect("cache fits");
    (ch, cache)
}
