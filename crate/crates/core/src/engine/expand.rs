use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::roadnet::{EdgeId, Point2D, RoadNetwork, VertexId};
use crate::spatial_index::FacilityIndex;

use super::cache::{KnnSearch, SsspCache};
use super::search::{search_from_object, Labels};
use super::{BatchResult, Counters, EngineConfig, MovingObject, QueryResult, QuerySpec, TraceEvent};

// Relative slack on Euclidean radii, well above the rounding in path sums
// and interpolated positions.
const RADIUS_SLACK: f64 = 1e-9;

/// Immutable per-batch state shared by all workers: the facility index and
/// the edge-to-objects inverted index.
pub struct BatchEngine<'a> {
    net: &'a RoadNetwork,
    spec: &'a QuerySpec,
    objects: &'a [MovingObject],
    config: EngineConfig,
    index: FacilityIndex,
    is_facility: Vec<bool>,
    object_weight: Vec<f64>,
    object_pos: Vec<Point2D>,
    // objects on edge e are edge_objects[edge_start[e]..edge_start[e + 1]]
    edge_start: Vec<u32>,
    edge_objects: Vec<u32>,
}

impl<'a> BatchEngine<'a> {
    pub fn new(
        net: &'a RoadNetwork,
        spec: &'a QuerySpec,
        objects: &'a [MovingObject],
        config: EngineConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut is_facility = vec![false; net.num_vertices()];
        for &f in spec.facilities() {
            if !net.contains(f) {
                return Err(Error::VertexOutOfRange(f));
            }
            is_facility[f.index()] = true;
        }
        if objects.len() > u32::MAX as usize {
            return Err(Error::invalid("too many objects"));
        }
        let mut ids = HashSet::with_capacity(objects.len());
        let mut object_edge = Vec::with_capacity(objects.len());
        let mut object_weight = Vec::with_capacity(objects.len());
        let mut object_pos = Vec::with_capacity(objects.len());
        for m in objects {
            if !ids.insert(m.id) {
                return Err(Error::invalid(format!("duplicate object id {}", m.id)));
            }
            let e = m.edge_in(net)?;
            let w = net.edge(e).weight;
            object_edge.push(e);
            object_weight.push(w);
            object_pos.push(m.position(net, w));
        }
        let mut edge_start = vec![0u32; net.num_edges() + 1];
        for &e in &object_edge {
            edge_start[e as usize + 1] += 1;
        }
        for i in 0..net.num_edges() {
            edge_start[i + 1] += edge_start[i];
        }
        let mut cursor = edge_start.clone();
        let mut edge_objects = vec![0u32; objects.len()];
        for (i, &e) in object_edge.iter().enumerate() {
            edge_objects[cursor[e as usize] as usize] = i as u32;
            cursor[e as usize] += 1;
        }
        let points: Vec<(VertexId, Point2D)> = spec.facilities().iter().map(|&f| (f, net.coord(f))).collect();
        let index = FacilityIndex::build(&points, config.max_entries)?;
        Ok(BatchEngine {
            net,
            spec,
            objects,
            config,
            index,
            is_facility,
            object_weight,
            object_pos,
            edge_start,
            edge_objects,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn index(&self) -> &FacilityIndex {
        &self.index
    }

    pub fn objects(&self) -> &[MovingObject] {
        self.objects
    }

    /// A fresh worker with an empty cache.
    pub fn worker(&self) -> Worker<'_, 'a> {
        Worker {
            engine: self,
            cache: SsspCache::new(self.config.cache_enabled),
            counters: Counters::default(),
            tree: Labels::new(self.net.num_vertices()),
            probe: Labels::new(self.net.num_vertices()),
            processed: vec![0; self.objects.len()],
            query_epoch: 0,
            trace: Vec::new(),
        }
    }

    /// Runs every query in input order against one shared cache, or on
    /// independent workers when `config.parallel` is set.
    pub fn run(&self) -> Result<BatchResult> {
        let start = Instant::now();
        let queries = self.run_queries()?;
        let wall_time = start.elapsed();
        let mut counters = Counters::default();
        for q in &queries {
            counters += &q.counters;
        }
        Ok(BatchResult {
            queries,
            counters,
            wall_time,
        })
    }

    #[cfg(feature = "parallel")]
    fn run_queries(&self) -> Result<Vec<QueryResult>> {
        if self.config.parallel {
            return self
                .spec
                .queries()
                .par_iter()
                .map_init(|| self.worker(), |w, &q| w.expand_query(q))
                .collect();
        }
        self.run_sequential()
    }

    #[cfg(not(feature = "parallel"))]
    fn run_queries(&self) -> Result<Vec<QueryResult>> {
        self.run_sequential()
    }

    fn run_sequential(&self) -> Result<Vec<QueryResult>> {
        let mut worker = self.worker();
        self.spec.queries().iter().map(|&q| worker.expand_query(q)).collect()
    }

    fn object_index(&self, m: &MovingObject) -> Option<usize> {
        self.objects.iter().position(|o| o.id == m.id && o == m)
    }

    #[inline]
    fn objects_on(&self, e: EdgeId) -> &[u32] {
        let (lo, hi) = (self.edge_start[e as usize], self.edge_start[e as usize + 1]);
        &self.edge_objects[lo as usize..hi as usize]
    }

    /// Euclidean radius guaranteed to cover every point within network
    /// distance `d`.
    #[inline]
    fn euclidean_cover(&self, d: f64) -> f64 {
        d * self.net.stretch() * (1.0 + RADIUS_SLACK) + self.config.tie_epsilon
    }
}

/// Mutable per-worker state: the SSSP cache, search scratch space and
/// counters.
pub struct Worker<'e, 'a> {
    engine: &'e BatchEngine<'a>,
    cache: SsspCache,
    counters: Counters,
    tree: Labels,
    probe: Labels,
    processed: Vec<u32>,
    query_epoch: u32,
    trace: Vec<TraceEvent>,
}

impl Worker<'_, '_> {
    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn cache(&self) -> &SsspCache {
        &self.cache
    }

    /// The object's bounded kNN search, served from the cache when present.
    pub fn sssp_from_object(&mut self, m: &MovingObject) -> Result<Arc<KnnSearch>> {
        let i = self
            .engine
            .object_index(m)
            .ok_or_else(|| Error::invalid(format!("object {} is not part of this batch", m.id)))?;
        Ok(self.search(i))
    }

    /// Nearest `k` facilities of `m`, ordered by `(distance, facility id)`.
    pub fn knn_of_object(&mut self, m: &MovingObject) -> Result<Vec<(VertexId, f64)>> {
        Ok(self.sssp_from_object(m)?.knn.clone())
    }

    /// Decides whether `q_f` is among the k nearest facilities of `m`, given
    /// an upper bound `d_r >= SD(m, q_f)` taken from the expansion.
    pub fn verify_rknn(&mut self, m: &MovingObject, q_f: VertexId, d_r: f64) -> Result<bool> {
        let i = self
            .engine
            .object_index(m)
            .ok_or_else(|| Error::invalid(format!("object {} is not part of this batch", m.id)))?;
        Ok(self.verify(i, q_f, d_r))
    }

    fn search(&mut self, i: usize) -> Arc<KnnSearch> {
        let engine = self.engine;
        let m = &engine.objects[i];
        let weight = engine.object_weight[i];
        let probe = &mut self.probe;
        let mut ran = false;
        let (entry, hit) = self.cache.get_or_insert_with(m.id, || {
            ran = true;
            let (distances, knn) = search_from_object(
                engine.net,
                m,
                weight,
                &engine.is_facility,
                Some(engine.spec.k()),
                probe,
            );
            KnnSearch { distances, knn }
        });
        if ran {
            self.counters.sssp_runs += 1;
        }
        if self.cache.is_enabled() {
            if hit {
                self.counters.cache_hits += 1;
            } else {
                self.counters.cache_misses += 1;
            }
        }
        entry
    }

    fn verify(&mut self, i: usize, q_f: VertexId, d_r: f64) -> bool {
        if !d_r.is_finite() {
            return false;
        }
        let engine = self.engine;
        let id = engine.objects[i].id;
        if engine.config.quick_verify_enabled && engine.net.metric_ok() {
            let radius = engine.euclidean_cover(d_r);
            let rc = engine
                .index
                .range_count_with(engine.config.rtree_mode, engine.object_pos[i], radius)
                .expect("finite probe");
            self.counters.rtree_nodes_visited += rc.nodes_visited as u64;
            if rc.count <= engine.spec.k() {
                self.counters.quick_verify_hits += 1;
                self.log(TraceEvent::QuickAccept { object: id });
                return true;
            }
        }
        self.counters.full_verifications += 1;
        let accepted = self.search(i).contains(q_f);
        self.log(TraceEvent::Fallback { object: id, accepted });
        accepted
    }

    /// Whether at least `k` facilities other than `q_f` lie strictly closer
    /// to `u` than `d_u`; if so nothing whose shortest path to `q_f` runs
    /// through `u` can have `q_f` among its k nearest.
    fn can_prune(&mut self, u: VertexId, d_u: f64, q_f: VertexId) -> bool {
        let engine = self.engine;
        let threshold = d_u - engine.config.tie_epsilon;
        if threshold <= 0.0 {
            return false;
        }
        let k = engine.spec.k();
        if engine.net.metric_ok() {
            // q_f itself is inside this circle, so <= k means < k others
            let rc = engine
                .index
                .range_count_with(engine.config.rtree_mode, engine.net.coord(u), engine.euclidean_cover(d_u))
                .expect("finite probe");
            self.counters.rtree_nodes_visited += rc.nodes_visited as u64;
            if rc.count <= k {
                return false;
            }
        }
        self.counters.prune_probes += 1;
        let labels = &mut self.probe;
        labels.reset();
        labels.relax(u, 0.0);
        let mut closer = 0;
        while let Some(e) = labels.pop() {
            if e.dist >= threshold {
                return false;
            }
            if e.vertex != q_f && engine.is_facility[e.vertex.index()] {
                closer += 1;
                if closer >= k {
                    return true;
                }
            }
            for (x, w) in engine.net.arcs(e.vertex) {
                let nd = e.dist + w;
                if nd < threshold {
                    labels.relax(x, nd);
                }
            }
        }
        false
    }

    /// Reverse k-nearest neighbors of `q_f` among the batch's objects.
    pub fn expand_query(&mut self, q_f: VertexId) -> Result<QueryResult> {
        let engine = self.engine;
        if !engine.net.contains(q_f) {
            return Err(Error::VertexOutOfRange(q_f));
        }
        if !engine.is_facility[q_f.index()] {
            return Err(Error::invalid(format!("query vertex {q_f} is not a facility")));
        }
        let before = self.counters.clone();
        self.trace.clear();
        self.next_query_epoch();
        let epoch = self.query_epoch;

        let mut result = Vec::new();
        self.tree.reset();
        self.tree.relax(q_f, 0.0);
        while let Some(entry) = self.tree.pop() {
            let (u, d_u) = (entry.vertex, entry.dist);
            self.counters.vertices_settled += 1;
            self.log(TraceEvent::Settle { vertex: u, dist: d_u });

            let mut arcs = engine.net.arcs(u);
            let edge_ids = arcs.edge_ids();
            for (a, (x, w)) in edge_ids.iter().zip(arcs.by_ref()) {
                for &oi in engine.objects_on(*a) {
                    let oi = oi as usize;
                    if self.processed[oi] == epoch {
                        continue;
                    }
                    self.processed[oi] = epoch;
                    let m = &engine.objects[oi];
                    let to_u = if u == m.u { m.offset } else { w - m.offset };
                    // the far endpoint may already carry a tentative label
                    let d_r = (d_u + to_u).min(self.tree.get(x) + (w - to_u));
                    if self.verify(oi, q_f, d_r) {
                        result.push(m.id);
                    }
                }
            }

            if engine.config.pruning_enabled && self.can_prune(u, d_u, q_f) {
                self.counters.pruned_vertices += 1;
                self.log(TraceEvent::Prune { vertex: u });
                continue;
            }
            for (x, w) in engine.net.arcs(u) {
                let nd = d_u + w;
                if engine.config.max_search_radius.is_some_and(|r| nd > r) {
                    continue;
                }
                self.tree.relax(x, nd);
            }
        }
        result.sort_unstable();
        Ok(QueryResult {
            facility: q_f,
            objects: result,
            counters: self.counters.since(&before),
            trace: std::mem::take(&mut self.trace),
        })
    }

    fn next_query_epoch(&mut self) {
        if self.query_epoch == u32::MAX {
            self.processed.fill(0);
            self.query_epoch = 0;
        }
        self.query_epoch += 1;
    }

    #[inline]
    fn log(&mut self, event: TraceEvent) {
        if self.engine.config.trace {
            self.trace.push(event);
        }
    }
}

/// Builds the index for one batch, runs it with a fresh cache, and returns
/// per-query RkNN sets plus counters.
pub fn batch_rknn(
    net: &RoadNetwork,
    spec: &QuerySpec,
    objects: &[MovingObject],
    config: &EngineConfig,
) -> Result<BatchResult> {
    BatchEngine::new(net, spec, objects, config.clone())?.run()
}
