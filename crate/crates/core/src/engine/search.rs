use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::roadnet::{RoadNetwork, VertexId};

use super::cache::DistanceMap;
use super::MovingObject;

#[derive(Copy, Clone, Debug, PartialEq)]
pub(crate) struct HeapEntry {
    pub dist: f64,
    pub vertex: VertexId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // reversed for a min-heap; ties pop the lower vertex id first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Tentative and settled labels for one Dijkstra search, reset in O(1)
/// between searches via epoch stamps.
pub(crate) struct Labels {
    dist: Vec<f64>,
    seen: Vec<u32>,
    done: Vec<u32>,
    epoch: u32,
    pub heap: BinaryHeap<HeapEntry>,
}

impl Labels {
    pub fn new(n: usize) -> Self {
        Labels {
            dist: vec![f64::INFINITY; n],
            seen: vec![0; n],
            done: vec![0; n],
            epoch: 0,
            heap: BinaryHeap::new(),
        }
    }

    pub fn reset(&mut self) {
        self.heap.clear();
        if self.epoch == u32::MAX {
            self.seen.fill(0);
            self.done.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
    }

    #[inline]
    pub fn get(&self, v: VertexId) -> f64 {
        if self.seen[v.index()] == self.epoch {
            self.dist[v.index()]
        } else {
            f64::INFINITY
        }
    }

    /// Lowers the label of `v` to `d` and queues it; returns whether it
    /// improved.
    #[inline]
    pub fn relax(&mut self, v: VertexId, d: f64) -> bool {
        let i = v.index();
        if self.done[i] == self.epoch {
            return false;
        }
        if self.seen[i] != self.epoch || d < self.dist[i] {
            self.seen[i] = self.epoch;
            self.dist[i] = d;
            self.heap.push(HeapEntry { dist: d, vertex: v });
            return true;
        }
        false
    }

    /// Pops the next vertex to settle, skipping stale entries.
    #[inline]
    pub fn pop(&mut self) -> Option<HeapEntry> {
        while let Some(e) = self.heap.pop() {
            let i = e.vertex.index();
            if self.done[i] != self.epoch && e.dist == self.dist[i] {
                self.done[i] = self.epoch;
                return Some(e);
            }
        }
        None
    }

    #[inline]
    pub fn peek_dist(&mut self) -> Option<f64> {
        while let Some(e) = self.heap.peek() {
            let i = e.vertex.index();
            if self.done[i] != self.epoch && e.dist == self.dist[i] {
                return Some(e.dist);
            }
            self.heap.pop();
        }
        None
    }
}

/// Dijkstra from an on-edge object, seeded at both edge endpoints.
///
/// With `limit = Some(k)` the search stops once `k` facilities are settled
/// and every vertex tied with the k-th one has been settled too; the
/// returned map then holds exactly the vertices within that radius.
pub(crate) fn search_from_object(
    net: &RoadNetwork,
    m: &MovingObject,
    weight: f64,
    is_facility: &[bool],
    limit: Option<usize>,
    labels: &mut Labels,
) -> (DistanceMap, Vec<(VertexId, f64)>) {
    labels.reset();
    labels.relax(m.u, m.offset);
    labels.relax(m.v, weight - m.offset);
    let mut settled = Vec::new();
    let mut found: Vec<(VertexId, f64)> = Vec::new();
    let mut bound = f64::INFINITY;
    let mut exhausted = true;
    while let Some(d) = labels.peek_dist() {
        if d > bound {
            exhausted = false;
            break;
        }
        let HeapEntry { dist, vertex } = labels.pop().expect("peeked entry");
        settled.push((vertex, dist));
        if is_facility[vertex.index()] {
            found.push((vertex, dist));
            if Some(found.len()) == limit {
                bound = dist;
            }
        }
        for (x, w) in net.arcs(vertex) {
            labels.relax(x, dist + w);
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if let Some(k) = limit {
        found.truncate(k);
    }
    let radius = if exhausted { f64::INFINITY } else { bound };
    (DistanceMap::new(m.id, settled, radius), found)
}

/// Complete shortest-path distances from an object to every reachable
/// vertex.
pub fn object_distances(net: &RoadNetwork, m: &MovingObject) -> Result<DistanceMap> {
    let edge = m.edge_in(net)?;
    let mut labels = Labels::new(net.num_vertices());
    let none = vec![false; net.num_vertices()];
    Ok(search_from_object(net, m, net.edge(edge).weight, &none, None, &mut labels).0)
}
