//! Brute-force ground truth for reverse kNN.
//!
//! Distances are computed exactly as defined: full Dijkstra from both
//! endpoints of an object's edge, then
//! `SD(m, q) = min(off + SD(u, q), w - off + SD(v, q))` for every facility.
//! Nothing here touches the engine's search, cache, pruning or R-tree code;
//! only the network container and the public domain types are shared.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::engine::{MovingObject, ObjectId, QuerySpec};
use crate::error::Result;
use crate::roadnet::{RoadNetwork, VertexId};

#[derive(Copy, Clone, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Plain binary-heap Dijkstra over the whole graph.
pub fn dijkstra(net: &RoadNetwork, source: VertexId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; net.num_vertices()];
    let mut heap = BinaryHeap::new();
    dist[source.index()] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u.index()] {
            continue;
        }
        for (v, w) in net.neighbors(u).expect("vertex in range") {
            let nd = d + w;
            if nd < dist[v.index()] {
                dist[v.index()] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}

/// Network distance from `m` to every facility, by definition.
pub fn object_to_facilities(net: &RoadNetwork, m: &MovingObject, facilities: &[VertexId]) -> Result<Vec<(VertexId, f64)>> {
    let edge = m.edge_in(net)?;
    let w = net.edge(edge).weight;
    let from_u = dijkstra(net, m.u);
    let from_v = dijkstra(net, m.v);
    Ok(facilities
        .iter()
        .map(|&q| {
            let d = (m.offset + from_u[q.index()]).min(w - m.offset + from_v[q.index()]);
            (q, d)
        })
        .collect())
}

/// The `k` nearest reachable facilities of `m`, ordered by distance then
/// facility id.
pub fn knn(net: &RoadNetwork, m: &MovingObject, facilities: &[VertexId], k: usize) -> Result<Vec<(VertexId, f64)>> {
    let mut all: Vec<_> = object_to_facilities(net, m, facilities)?
        .into_iter()
        .filter(|(_, d)| d.is_finite())
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    Ok(all)
}

/// For every distinct query facility, the objects that count it among their
/// k nearest facilities.
pub fn rknn_oracle(
    net: &RoadNetwork,
    spec: &QuerySpec,
    objects: &[MovingObject],
) -> Result<BTreeMap<VertexId, BTreeSet<ObjectId>>> {
    rknn_oracle_with(net, spec, objects, cfg!(feature = "parallel"))
}

/// [`rknn_oracle`] with explicit control over parallelism across objects.
/// Without the `parallel` feature the flag is ignored.
pub fn rknn_oracle_with(
    net: &RoadNetwork,
    spec: &QuerySpec,
    objects: &[MovingObject],
    parallel: bool,
) -> Result<BTreeMap<VertexId, BTreeSet<ObjectId>>> {
    let lists = knn_lists(net, spec, objects, parallel)?;
    let mut out: BTreeMap<VertexId, BTreeSet<ObjectId>> =
        spec.queries().iter().map(|&q| (q, BTreeSet::new())).collect();
    for (m, list) in objects.iter().zip(&lists) {
        for (f, _) in list {
            if let Some(set) = out.get_mut(f) {
                set.insert(m.id);
            }
        }
    }
    Ok(out)
}

fn knn_lists(
    net: &RoadNetwork,
    spec: &QuerySpec,
    objects: &[MovingObject],
    parallel: bool,
) -> Result<Vec<Vec<(VertexId, f64)>>> {
    let one = |m: &MovingObject| knn(net, m, spec.facilities(), spec.k());
    #[cfg(feature = "parallel")]
    if parallel {
        return objects.par_iter().map(one).collect();
    }
    let _ = parallel;
    objects.iter().map(one).collect()
}
