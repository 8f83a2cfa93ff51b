use std::collections::HashMap;
use std::sync::Arc;

use crate::roadnet::VertexId;

use super::ObjectId;

/// Finalized shortest-path distances from one object.
///
/// The search behind a map may stop early; every vertex with distance at or
/// below [`DistanceMap::radius`] is present and exact, anything absent is
/// farther than the radius (or unreachable when the radius is infinite).
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    source: ObjectId,
    dist: HashMap<VertexId, f64>,
    radius: f64,
}

impl DistanceMap {
    pub(crate) fn new(source: ObjectId, settled: Vec<(VertexId, f64)>, radius: f64) -> Self {
        DistanceMap {
            source,
            dist: settled.into_iter().collect(),
            radius,
        }
    }

    pub fn source(&self) -> ObjectId {
        self.source
    }

    pub fn get(&self, v: VertexId) -> Option<f64> {
        self.dist.get(&v).copied()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn is_complete(&self) -> bool {
        self.radius == f64::INFINITY
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }
}

/// A cached object search: its distance map and the kNN list derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnSearch {
    pub distances: DistanceMap,
    /// Nearest facilities by `(distance, id)`.
    pub knn: Vec<(VertexId, f64)>,
}

impl KnnSearch {
    pub fn contains(&self, facility: VertexId) -> bool {
        self.knn.iter().any(|(f, _)| *f == facility)
    }
}

/// Per-batch store of object searches. Entries are only ever inserted.
#[derive(Debug, Default)]
pub struct SsspCache {
    enabled: bool,
    entries: HashMap<ObjectId, Arc<KnnSearch>>,
    hits: u64,
    misses: u64,
}

impl SsspCache {
    pub fn new(enabled: bool) -> Self {
        SsspCache {
            enabled,
            ..Default::default()
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.hits = 0;
        self.misses = 0;
    }

    pub fn peek(&self, id: ObjectId) -> Option<&Arc<KnnSearch>> {
        self.entries.get(&id)
    }

    /// Returns the cached search for `id`, running `compute` on a miss.
    /// A disabled cache computes every time and stores nothing.
    pub(crate) fn get_or_insert_with<F>(&mut self, id: ObjectId, compute: F) -> (Arc<KnnSearch>, bool)
    where
        F: FnOnce() -> KnnSearch,
    {
        if !self.enabled {
            return (Arc::new(compute()), false);
        }
        if let Some(hit) = self.entries.get(&id) {
            self.hits += 1;
            return (Arc::clone(hit), true);
        }
        self.misses += 1;
        let entry = Arc::new(compute());
        self.entries.insert(id, Arc::clone(&entry));
        (entry, false)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }
}
