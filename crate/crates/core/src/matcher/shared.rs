use std::sync::{Arc, RwLock};

use super::{CentroidIndex, ExpertEntry};

/// Copy-on-write handle to a [`CentroidIndex`].
///
/// Readers take an `Arc` snapshot and never block on registrations; a
/// registration clones the current index, applies the change and swaps the
/// new version in, so every query sees one consistent index state.
#[derive(Clone, Debug, Default)]
pub struct SharedIndex {
    current: Arc<RwLock<Arc<CentroidIndex>>>,
}

impl SharedIndex {
    pub fn new(index: CentroidIndex) -> Self {
        SharedIndex {
            current: Arc::new(RwLock::new(Arc::new(index))),
        }
    }

    pub fn snapshot(&self) -> Arc<CentroidIndex> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Adds or replaces an expert. Returns whether an entry was replaced and
    /// the resulting entry count.
    pub fn register(&self, entry: ExpertEntry) -> (bool, usize) {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let mut next = CentroidIndex::clone(&guard);
        let replaced = next.insert(entry).is_some();
        let len = next.len();
        *guard = Arc::new(next);
        (replaced, len)
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
