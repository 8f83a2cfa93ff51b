//! Batch reverse-kNN engine.
//!
//! For each query facility the engine grows a Dijkstra tree outward, checks
//! every moving object on an edge incident to a settled vertex, and cuts the
//! tree below any vertex that already has `k` other facilities strictly
//! closer than the query. A candidate object is first tested with a
//! Euclidean range count around its position (at most `k` facilities inside
//! the circle of radius `SD(m, q)` proves membership); otherwise its network
//! kNN is computed, and that result is cached for the rest of the batch.

mod cache;
mod expand;
mod search;

use std::fmt;
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roadnet::{EdgeId, Point2D, RoadNetwork, VertexId};
use crate::spatial_index::{PruneMode, DEFAULT_MAX_ENTRIES};

pub use cache::{DistanceMap, KnnSearch, SsspCache};
pub use expand::{batch_rknn, BatchEngine, Worker};
pub use search::object_distances;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ObjectId(pub u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An object parked on an edge, `offset` away from the lower-id endpoint.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct MovingObject {
    pub id: ObjectId,
    pub u: VertexId,
    pub v: VertexId,
    pub offset: f64,
}

impl MovingObject {
    /// Places an object on the edge between `a` and `b`, `offset_from_a`
    /// along it from `a`. The result is stored in canonical orientation.
    pub fn new(net: &RoadNetwork, id: ObjectId, a: VertexId, b: VertexId, offset_from_a: f64) -> Result<Self> {
        let edge = net.find_edge(a, b).ok_or(Error::NoSuchEdge(a, b))?;
        let w = net.edge(edge).weight;
        let offset = if a < b { offset_from_a } else { w - offset_from_a };
        let m = MovingObject {
            id,
            u: a.min(b),
            v: a.max(b),
            offset,
        };
        if !(0.0..=w).contains(&offset_from_a) {
            return Err(Error::InvalidOffset {
                u: m.u,
                v: m.v,
                offset: offset_from_a,
                weight: w,
            });
        }
        Ok(m)
    }

    /// Checks the object against `net` and returns its edge.
    pub fn edge_in(&self, net: &RoadNetwork) -> Result<EdgeId> {
        if self.u >= self.v {
            return Err(Error::invalid(format!(
                "object {} edge ({}, {}) is not in canonical order",
                self.id, self.u, self.v
            )));
        }
        let edge = net.find_edge(self.u, self.v).ok_or(Error::NoSuchEdge(self.u, self.v))?;
        let w = net.edge(edge).weight;
        if !(0.0..=w).contains(&self.offset) {
            return Err(Error::InvalidOffset {
                u: self.u,
                v: self.v,
                offset: self.offset,
                weight: w,
            });
        }
        Ok(edge)
    }

    /// Linear interpolation between the endpoint coordinates.
    pub fn position(&self, net: &RoadNetwork, weight: f64) -> Point2D {
        net.coord(self.u).lerp(&net.coord(self.v), self.offset / weight)
    }
}

/// `min(off + SD(u, q), w - off + SD(v, q))` given endpoint distances.
///
/// `vertex_dist` returns `f64::INFINITY` for unreachable vertices.
pub fn object_facility_distance<F>(net: &RoadNetwork, m: &MovingObject, vertex_dist: F) -> Result<f64>
where
    F: Fn(VertexId) -> f64,
{
    let edge = m.edge_in(net)?;
    let w = net.edge(edge).weight;
    Ok((m.offset + vertex_dist(m.u)).min(w - m.offset + vertex_dist(m.v)))
}

/// Query batch: the query facilities `Q_q`, all facilities `Q_f`, and `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuerySpec {
    queries: Vec<VertexId>,
    facilities: Vec<VertexId>,
    k: usize,
}

impl QuerySpec {
    /// `facilities` is deduplicated and sorted; every query must be one of
    /// them.
    pub fn new(net: &RoadNetwork, queries: Vec<VertexId>, k: usize, mut facilities: Vec<VertexId>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        facilities.sort_unstable();
        facilities.dedup();
        if let Some(&v) = facilities.iter().find(|v| !net.contains(**v)) {
            return Err(Error::VertexOutOfRange(v));
        }
        for q in &queries {
            if facilities.binary_search(q).is_err() {
                return Err(Error::invalid(format!("query vertex {q} is not a facility")));
            }
        }
        Ok(QuerySpec {
            queries,
            facilities,
            k,
        })
    }

    /// Every vertex is a facility.
    pub fn all_vertices(net: &RoadNetwork, queries: Vec<VertexId>, k: usize) -> Result<Self> {
        let facilities = (0..net.num_vertices() as u32).map(VertexId).collect();
        Self::new(net, queries, k, facilities)
    }

    pub fn queries(&self) -> &[VertexId] {
        &self.queries
    }

    pub fn facilities(&self) -> &[VertexId] {
        &self.facilities
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_facility(&self, v: VertexId) -> bool {
        self.facilities.binary_search(&v).is_ok()
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(QuerySpec { k, ..self.clone() })
    }

    pub fn with_queries(&self, queries: Vec<VertexId>) -> Result<Self> {
        for q in &queries {
            if !self.is_facility(*q) {
                return Err(Error::invalid(format!("query vertex {q} is not a facility")));
            }
        }
        Ok(QuerySpec { queries, ..self.clone() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineConfig {
    pub quick_verify_enabled: bool,
    pub cache_enabled: bool,
    pub pruning_enabled: bool,
    pub rtree_mode: PruneMode,
    pub max_search_radius: Option<f64>,
    /// Guard band on the strict comparisons behind pruning and quick
    /// verification; positive values only make both more conservative.
    pub tie_epsilon: f64,
    pub max_entries: usize,
    /// Run queries on independent workers, each with a private cache.
    /// Ignored when the crate is built without the `parallel` feature.
    pub parallel: bool,
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            quick_verify_enabled: true,
            cache_enabled: true,
            pruning_enabled: true,
            rtree_mode: PruneMode::Mbc,
            max_search_radius: None,
            tie_epsilon: 0.0,
            max_entries: DEFAULT_MAX_ENTRIES,
            parallel: false,
            trace: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tie_epsilon >= 0.0 && self.tie_epsilon.is_finite()) {
            return Err(Error::invalid("tie_epsilon must be finite and >= 0"));
        }
        if let Some(r) = self.max_search_radius {
            if r.is_nan() || r < 0.0 {
                return Err(Error::invalid("max_search_radius must be >= 0"));
            }
        }
        if self.max_entries < 2 {
            return Err(Error::invalid("max_entries must be >= 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    /// Object-sourced shortest-path searches actually executed.
    pub sssp_runs: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub rtree_nodes_visited: u64,
    pub quick_verify_hits: u64,
    pub full_verifications: u64,
    pub vertices_settled: u64,
    /// Bounded searches run to confirm a pruning decision.
    pub prune_probes: u64,
    pub pruned_vertices: u64,
}

impl Counters {
    /// `hits / (hits + misses)`, or `None` when the cache was never consulted.
    pub fn cache_hit_rate(&self) -> Option<f64> {
        let total = self.cache_hits + self.cache_misses;
        (total > 0).then(|| self.cache_hits as f64 / total as f64)
    }

    pub fn verifications(&self) -> u64 {
        self.quick_verify_hits + self.full_verifications
    }

    pub fn since(&self, earlier: &Counters) -> Counters {
        Counters {
            sssp_runs: self.sssp_runs - earlier.sssp_runs,
            cache_hits: self.cache_hits - earlier.cache_hits,
            cache_misses: self.cache_misses - earlier.cache_misses,
            rtree_nodes_visited: self.rtree_nodes_visited - earlier.rtree_nodes_visited,
            quick_verify_hits: self.quick_verify_hits - earlier.quick_verify_hits,
            full_verifications: self.full_verifications - earlier.full_verifications,
            vertices_settled: self.vertices_settled - earlier.vertices_settled,
            prune_probes: self.prune_probes - earlier.prune_probes,
            pruned_vertices: self.pruned_vertices - earlier.pruned_vertices,
        }
    }
}

impl std::ops::AddAssign<&Counters> for Counters {
    fn add_assign(&mut self, o: &Counters) {
        self.sssp_runs += o.sssp_runs;
        self.cache_hits += o.cache_hits;
        self.cache_misses += o.cache_misses;
        self.rtree_nodes_visited += o.rtree_nodes_visited;
        self.quick_verify_hits += o.quick_verify_hits;
        self.full_verifications += o.full_verifications;
        self.vertices_settled += o.vertices_settled;
        self.prune_probes += o.prune_probes;
        self.pruned_vertices += o.pruned_vertices;
    }
}

/// One line of the per-query debug log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TraceEvent {
    Settle { vertex: VertexId, dist: f64 },
    Prune { vertex: VertexId },
    QuickAccept { object: ObjectId },
    Fallback { object: ObjectId, accepted: bool },
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Settle { vertex, dist } => write!(f, "settle {vertex} {dist}"),
            TraceEvent::Prune { vertex } => write!(f, "prune {vertex}"),
            TraceEvent::QuickAccept { object } => write!(f, "quick {object}"),
            TraceEvent::Fallback { object, accepted } => {
                write!(f, "fallback {object} {}", if *accepted { "accept" } else { "reject" })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    pub facility: VertexId,
    /// Reverse k-nearest neighbors, sorted by id.
    pub objects: Vec<ObjectId>,
    pub counters: Counters,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchResult {
    /// One entry per query, in input order.
    pub queries: Vec<QueryResult>,
    pub counters: Counters,
    /// Query phase only; index construction is excluded.
    pub wall_time: Duration,
}

impl BatchResult {
    pub fn result_sets(&self) -> Vec<(VertexId, &[ObjectId])> {
        self.queries.iter().map(|q| (q.facility, q.objects.as_slice())).collect()
    }

    pub fn total_results(&self) -> usize {
        self.queries.iter().map(|q| q.objects.len()).sum()
    }
}
