//! Score memo shared by discovery workers.

use std::collections::HashMap;

use parking_lot::RwLock;
use rootterm_core::dataset::{Score, ScoreMemo};

/// Concurrent memo. Racing workers may score the same key twice; the
/// values are identical so the last write wins.
#[derive(Debug, Default)]
pub struct SharedScoreCache {
    map: RwLock<HashMap<String, Score>>,
}

impl SharedScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.read().is_empty()
    }
}

impl ScoreMemo for SharedScoreCache {
    fn lookup(&self, key: &str) -> Option<Score> {
        self.map.read().get(key).copied()
    }

    fn store(&self, key: String, score: Score) {
        self.map.write().insert(key, score);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn concurrent_inserts_are_visible() {
        let cache = Arc::new(SharedScoreCache::new());
        let handles: Vec<_> = (0..8)
            .map(|w| {
                let cache = Arc::clone(&cache);
                std::thread::spawn(move || {
                    for i in 0..100u32 {
                        let score = Score { hits: i, states_scored: 100, early_stopped: false };
                        cache.store(format!("k{i}"), score);
                        assert_eq!(cache.lookup(&format!("k{i}")).map(|s| s.hits), Some(i), "worker {w}");
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(cache.len(), 100);
    }
}
