//! Synthetic road networks for tests, benches and desk-scale experiments.
//!
//! Both generators produce connected graphs whose edge weights are at least
//! the Euclidean span of their endpoints, so the metric premise holds.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::roadnet::{Point2D, RoadNetwork, VertexId};

const GRID_SPACING: f64 = 100.0;

/// Jittered `rows × cols` lattice with 4-neighbour streets and occasional
/// diagonals. Weights are integers: the Euclidean span stretched by a random
/// detour factor in `[1, 1.3)` and rounded up, like DIMACS distance graphs.
pub fn grid(rows: usize, cols: usize, seed: u64) -> RoadNetwork {
    let mut rng = Pcg64::seed_from_u64(seed);
    let id = |r: usize, c: usize| VertexId((r * cols + c) as u32);
    let coords: Vec<Point2D> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            Point2D::new(
                c as f64 * GRID_SPACING + rng.random_range(-20.0..20.0),
                r as f64 * GRID_SPACING + rng.random_range(-20.0..20.0),
            )
        })
        .collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
            if r + 1 < rows && c + 1 < cols && rng.random_bool(0.1) {
                edges.push((id(r, c), id(r + 1, c + 1)));
            }
        }
    }
    let weighted: Vec<_> = edges
        .into_iter()
        .map(|(a, b)| {
            let ed = coords[a.index()].distance(&coords[b.index()]);
            (a, b, (ed * rng.random_range(1.0..1.3)).ceil().max(1.0))
        })
        .collect();
    RoadNetwork::from_edges(coords, weighted).expect("valid grid")
}

/// Random connected graph: `n` points in a 1000 × 1000 square, a random
/// spanning tree (each vertex joins its nearest predecessor among a few
/// random candidates), plus `extra_edges` uniformly random pairs.
///
/// With `integral` set, coordinates are integers and weights are rounded up
/// to integers, which makes exact distance ties common.
pub fn random_connected(n: usize, extra_edges: usize, integral: bool, seed: u64) -> RoadNetwork {
    let mut rng = Pcg64::seed_from_u64(seed);
    let coords: Vec<Point2D> = (0..n)
        .map(|_| {
            if integral {
                Point2D::new(rng.random_range(0..1000) as f64, rng.random_range(0..1000) as f64)
            } else {
                Point2D::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))
            }
        })
        .collect();
    let mut pairs = Vec::with_capacity(n + extra_edges);
    for i in 1..n {
        let best = (0..4)
            .map(|_| rng.random_range(0..i))
            .min_by(|&a, &b| {
                coords[i]
                    .distance(&coords[a])
                    .total_cmp(&coords[i].distance(&coords[b]))
            })
            .expect("i >= 1");
        pairs.push((VertexId(i as u32), VertexId(best as u32)));
    }
    if n >= 2 {
        for _ in 0..extra_edges {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                pairs.push((VertexId(a as u32), VertexId(b as u32)));
            }
        }
    }
    let weighted: Vec<_> = pairs
        .into_iter()
        .map(|(a, b)| {
            let ed = coords[a.index()].distance(&coords[b.index()]);
            let w = ed * rng.random_range(1.0..1.5);
            let w = if integral { w.ceil().max(1.0) } else { w.max(1e-3) };
            (a, b, w)
        })
        .collect();
    RoadNetwork::from_edges(coords, weighted).expect("valid random graph")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dijkstra;

    #[test]
    fn generators_are_connected_and_metric() {
        for net in [grid(7, 9, 3), random_connected(300, 400, false, 4), random_connected(300, 400, true, 5)] {
            assert!(net.metric_ok());
            assert_eq!(net.validate_metric(0.0).violations, 0);
            assert!(dijkstra(&net, VertexId(0)).iter().all(|d| d.is_finite()));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(grid(5, 5, 1), grid(5, 5, 1));
        assert_eq!(random_connected(50, 20, true, 2), random_connected(50, 20, true, 2));
    }
}
