//! Count-augmented R-tree over facility coordinates.
//!
//! The tree is bulk-loaded once with Sort-Tile-Recursive packing and never
//! modified. Every node stores the number of facilities below it, so a
//! circular range count can add a whole subtree without descending when the
//! subtree's rectangle lies inside the circle.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roadnet::{Point2D, VertexId};

pub const DEFAULT_MAX_ENTRIES: usize = 16;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Mbr {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Mbr {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        debug_assert!(min_x <= max_x && min_y <= max_y);
        Mbr {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn from_point(p: Point2D) -> Self {
        Mbr::new(p.x, p.y, p.x, p.y)
    }

    fn empty() -> Self {
        Mbr {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    fn expand(&mut self, other: &Mbr) {
        self.min_x = self.min_x.min(other.min_x);
        self.min_y = self.min_y.min(other.min_y);
        self.max_x = self.max_x.max(other.max_x);
        self.max_y = self.max_y.max(other.max_y);
    }

    pub fn contains_point(&self, p: &Point2D) -> bool {
        self.min_x <= p.x && p.x <= self.max_x && self.min_y <= p.y && p.y <= self.max_y
    }

    pub fn contains(&self, other: &Mbr) -> bool {
        self.min_x <= other.min_x
            && other.max_x <= self.max_x
            && self.min_y <= other.min_y
            && other.max_y <= self.max_y
    }

    fn center(&self) -> Point2D {
        Point2D::new(
            (self.min_x + self.max_x) * 0.5,
            (self.min_y + self.max_y) * 0.5,
        )
    }

    /// Per-axis gap between `center` and the rectangle (0 inside the slab).
    #[inline]
    fn gaps(&self, c: &Point2D) -> (f64, f64) {
        let dx = (self.min_x - c.x).max(c.x - self.max_x).max(0.0);
        let dy = (self.min_y - c.y).max(c.y - self.max_y).max(0.0);
        (dx, dy)
    }
}

/// Distance from `center` to the nearest point of `mbr`; 0 when inside.
#[inline]
pub fn min_dist(center: &Point2D, mbr: &Mbr) -> f64 {
    let (dx, dy) = mbr.gaps(center);
    (dx * dx + dy * dy).sqrt()
}

/// Distance from `center` to the farthest corner of `mbr`.
#[inline]
pub fn max_dist(center: &Point2D, mbr: &Mbr) -> f64 {
    let dx = (center.x - mbr.min_x).abs().max((mbr.max_x - center.x).abs());
    let dy = (center.y - mbr.min_y).abs().max((mbr.max_y - center.y).abs());
    (dx * dx + dy * dy).sqrt()
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    /// Circle tests on child rectangles: skip when `minDist > r`, take the
    /// stored count when `maxDist <= r`, descend otherwise.
    Mbc,
    /// Descend whenever the circle's bounding square overlaps the child
    /// rectangle; points are tested only at leaves.
    Mbr,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RangeCount {
    pub count: usize,
    pub nodes_visited: usize,
}

#[derive(Clone, Debug)]
struct Node {
    mbr: Mbr,
    count: usize,
    // children of an internal node are nodes[first..first + len];
    // entries of a leaf are entries[first..first + len]
    first: usize,
    len: usize,
    leaf: bool,
}

#[derive(Clone, Debug)]
pub struct FacilityIndex {
    nodes: Vec<Node>,
    entries: Vec<(VertexId, Point2D)>,
    root: Option<usize>,
    max_entries: usize,
}

impl FacilityIndex {
    /// Bulk-loads the tree with Sort-Tile-Recursive packing.
    ///
    /// An empty facility set yields an empty index whose counts are all 0.
    pub fn build(facilities: &[(VertexId, Point2D)], max_entries: usize) -> Result<Self> {
        if max_entries < 2 {
            return Err(Error::invalid(format!("max_entries must be >= 2, got {max_entries}")));
        }
        if let Some((v, _)) = facilities.iter().find(|(_, p)| !p.is_finite()) {
            return Err(Error::invalid(format!("facility {v} has non-finite coordinates")));
        }
        let mut index = FacilityIndex {
            nodes: Vec::new(),
            entries: Vec::with_capacity(facilities.len()),
            root: None,
            max_entries,
        };
        if facilities.is_empty() {
            return Ok(index);
        }

        let mut order: Vec<usize> = (0..facilities.len()).collect();
        let centers: Vec<Point2D> = facilities.iter().map(|f| f.1).collect();
        let groups = str_groups(&mut order, &centers, max_entries);
        let mut level: Vec<usize> = Vec::with_capacity(groups.len());
        for group in groups {
            let first = index.entries.len();
            let mut mbr = Mbr::empty();
            for &i in group {
                index.entries.push(facilities[i]);
                mbr.expand(&Mbr::from_point(facilities[i].1));
            }
            level.push(index.nodes.len());
            index.nodes.push(Node {
                mbr,
                count: group.len(),
                first,
                len: group.len(),
                leaf: true,
            });
        }

        while level.len() > 1 {
            let centers: Vec<Point2D> = level.iter().map(|&n| index.nodes[n].mbr.center()).collect();
            let mut order: Vec<usize> = (0..level.len()).collect();
            let groups: Vec<Vec<usize>> = str_groups(&mut order, &centers, max_entries)
                .into_iter()
                .map(|g| g.to_vec())
                .collect();
            // children must be contiguous, so copy them into place in group order
            let mut next = Vec::with_capacity(groups.len());
            let mut parents = Vec::with_capacity(groups.len());
            for group in &groups {
                let first = index.nodes.len();
                let mut mbr = Mbr::empty();
                let mut count = 0;
                for &i in group {
                    let child = index.nodes[level[i]].clone();
                    mbr.expand(&child.mbr);
                    count += child.count;
                    index.nodes.push(child);
                }
                parents.push(Node {
                    mbr,
                    count,
                    first,
                    len: group.len(),
                    leaf: false,
                });
            }
            for p in parents {
                next.push(index.nodes.len());
                index.nodes.push(p);
            }
            level = next;
        }
        index.root = Some(level[0]);
        index.compact();
        Ok(index)
    }

    // Drops node copies orphaned by the level-by-level copying in `build`.
    fn compact(&mut self) {
        let Some(root) = self.root else { return };
        let mut nodes = Vec::with_capacity(self.nodes.len());
        nodes.push(self.nodes[root].clone());
        let mut head = 0;
        while head < nodes.len() {
            if !nodes[head].leaf {
                let (first, len) = (nodes[head].first, nodes[head].len);
                let new_first = nodes.len();
                for i in first..first + len {
                    nodes.push(self.nodes[i].clone());
                }
                nodes[head].first = new_first;
            }
            head += 1;
        }
        self.nodes = nodes;
        self.root = Some(0);
    }

    pub fn len(&self) -> usize {
        self.root.map_or(0, |r| self.nodes[r].count)
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn max_entries(&self) -> usize {
        self.max_entries
    }

    pub fn node_count(&self) -> usize {
        if self.root.is_some() {
            self.nodes.len()
        } else {
            0
        }
    }

    /// Number of levels; a lone leaf has height 1, an empty index 0.
    pub fn height(&self) -> usize {
        let Some(mut n) = self.root else { return 0 };
        let mut h = 1;
        while !self.nodes[n].leaf {
            n = self.nodes[n].first;
            h += 1;
        }
        h
    }

    pub fn root_mbr(&self) -> Option<Mbr> {
        self.root.map(|r| self.nodes[r].mbr)
    }

    /// Exact number of facilities with `ED(center, p) <= radius`.
    pub fn range_count(&self, center: Point2D, radius: f64) -> Result<usize> {
        Ok(self.range_count_mbc(center, radius)?.count)
    }

    pub fn range_count_with(&self, mode: PruneMode, center: Point2D, radius: f64) -> Result<RangeCount> {
        match mode {
            PruneMode::Mbc => self.range_count_mbc(center, radius),
            PruneMode::Mbr => self.range_count_mbr_only(center, radius),
        }
    }

    /// Circle-vs-rectangle traversal using `min_dist` / `max_dist`, adding
    /// stored subtree counts for fully covered children.
    pub fn range_count_mbc(&self, center: Point2D, radius: f64) -> Result<RangeCount> {
        check_probe(&center, radius)?;
        let mut out = RangeCount::default();
        let Some(root) = self.root else { return Ok(out) };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            out.nodes_visited += 1;
            let node = &self.nodes[n];
            if node.leaf {
                out.count += self.count_leaf(node, &center, radius);
                continue;
            }
            for c in node.first..node.first + node.len {
                let child = &self.nodes[c];
                if min_dist(&center, &child.mbr) <= radius {
                    if max_dist(&center, &child.mbr) <= radius {
                        out.count += child.count;
                    } else {
                        stack.push(c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Square-overlap traversal without the containment shortcut.
    pub fn range_count_mbr_only(&self, center: Point2D, radius: f64) -> Result<RangeCount> {
        check_probe(&center, radius)?;
        let mut out = RangeCount::default();
        let Some(root) = self.root else { return Ok(out) };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            out.nodes_visited += 1;
            let node = &self.nodes[n];
            if node.leaf {
                out.count += self.count_leaf(node, &center, radius);
                continue;
            }
            for c in node.first..node.first + node.len {
                // same per-axis gaps as min_dist, so an MBC descent implies an MBR descent
                let (dx, dy) = self.nodes[c].mbr.gaps(&center);
                if dx <= radius && dy <= radius {
                    stack.push(c);
                }
            }
        }
        Ok(out)
    }

    #[inline]
    fn count_leaf(&self, node: &Node, center: &Point2D, radius: f64) -> usize {
        self.entries[node.first..node.first + node.len]
            .iter()
            .filter(|(_, p)| center.distance(p) <= radius)
            .count()
    }

    /// Recomputes every subtree count and containment relation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return if self.entries.is_empty() {
                Ok(())
            } else {
                Err("empty root with entries".into())
            };
        };
        let total = self.audit_node(root)?;
        if total != self.entries.len() {
            return Err(format!("root covers {total} of {} entries", self.entries.len()));
        }
        Ok(())
    }

    fn audit_node(&self, n: usize) -> std::result::Result<usize, String> {
        let node = &self.nodes[n];
        if node.len == 0 || node.len > self.max_entries {
            return Err(format!("node {n} has fanout {}", node.len));
        }
        let actual = if node.leaf {
            for (v, p) in &self.entries[node.first..node.first + node.len] {
                if !node.mbr.contains_point(p) {
                    return Err(format!("leaf {n} does not contain facility {v}"));
                }
            }
            node.len
        } else {
            let mut sum = 0;
            for c in node.first..node.first + node.len {
                if !node.mbr.contains(&self.nodes[c].mbr) {
                    return Err(format!("node {n} does not contain child {c}"));
                }
                sum += self.audit_node(c)?;
            }
            sum
        };
        if actual != node.count {
            return Err(format!("node {n} stores count {} but holds {actual}", node.count));
        }
        Ok(actual)
    }

    /// Indented text rendering of the tree, one node per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(root) = self.root {
            self.dump_node(root, 0, &mut out);
        } else {
            out.push_str("(empty)\n");
        }
        out
    }

    fn dump_node(&self, n: usize, depth: usize, out: &mut String) {
        let node = &self.nodes[n];
        let m = &node.mbr;
        let indent = "  ".repeat(depth);
        let kind = if node.leaf { "leaf" } else { "node" };
        let _ = writeln!(
            out,
            "{indent}{kind} count={} mbr=[{}, {}]x[{}, {}]",
            node.count, m.min_x, m.max_x, m.min_y, m.max_y
        );
        if node.leaf {
            for (v, p) in &self.entries[node.first..node.first + node.len] {
                let _ = writeln!(out, "{indent}  f {v} ({}, {})", p.x, p.y);
            }
        } else {
            for c in node.first..node.first + node.len {
                self.dump_node(c, depth + 1, out);
            }
        }
    }
}

fn check_probe(center: &Point2D, radius: f64) -> Result<()> {
    if !center.is_finite() {
        return Err(Error::invalid("range count center must be finite"));
    }
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::invalid(format!("range count radius {radius} must be >= 0")));
    }
    Ok(())
}

/// Sort-Tile-Recursive grouping of `order` (indices into `centers`) into
/// runs of at most `cap`.
fn str_groups<'a>(order: &'a mut [usize], centers: &[Point2D], cap: usize) -> Vec<&'a [usize]> {
    let n = order.len();
    let leaves = n.div_ceil(cap);
    let slices = (leaves as f64).sqrt().ceil() as usize;
    let slice_len = slices * cap;
    let by = |a: &usize, b: &usize, key: fn(&Point2D) -> (f64, f64)| {
        let (ka, kb) = (key(&centers[*a]), key(&centers[*b]));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.cmp(b))
    };
    order.sort_by(|a, b| by(a, b, |p| (p.x, p.y)));
    let mut groups = Vec::with_capacity(leaves);
    for slice in order.chunks_mut(slice_len) {
        slice.sort_by(|a, b| by(a, b, |p| (p.y, p.x)));
        let slice: &'a [usize] = slice;
        groups.extend(slice.chunks(cap));
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn pts(coords: &[(f64, f64)]) -> Vec<(VertexId, Point2D)> {
        coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| (VertexId(i as u32), Point2D::new(x, y)))
            .collect()
    }

    fn linear_count(f: &[(VertexId, Point2D)], c: Point2D, r: f64) -> usize {
        f.iter().filter(|(_, p)| c.distance(p) <= r).count()
    }

    #[test]
    fn single_facility_is_one_leaf() {
        let idx = FacilityIndex::build(&pts(&[(1.0, 2.0)]), 16).unwrap();
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.height(), 1);
        assert_eq!(idx.node_count(), 1);
        idx.audit().unwrap();
    }

    #[test]
    fn collinear_points_conserve_count() {
        let f = pts(&(0..10).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let idx = FacilityIndex::build(&f, 4).unwrap();
        assert_eq!(idx.len(), 10);
        assert!(idx.height() >= 2);
        idx.audit().unwrap();
    }

    #[test]
    fn max_entries_must_be_at_least_two() {
        assert!(FacilityIndex::build(&pts(&[(0.0, 0.0)]), 1).is_err());
    }

    #[test]
    fn empty_index_counts_zero() {
        let idx = FacilityIndex::build(&[], 16).unwrap();
        assert_eq!(idx.len(), 0);
        assert_eq!(idx.range_count(Point2D::new(0.0, 0.0), 10.0).unwrap(), 0);
        assert_eq!(
            idx.range_count_mbr_only(Point2D::new(0.0, 0.0), 10.0).unwrap(),
            RangeCount::default()
        );
        idx.audit().unwrap();
    }

    #[test]
    fn zero_radius_is_inclusive() {
        let f = pts(&[(1.0, 1.0), (1.0, 1.0), (2.0, 2.0)]);
        let idx = FacilityIndex::build(&f, 2).unwrap();
        let c = Point2D::new(2.0, 2.0);
        assert_eq!(idx.range_count(c, 0.0).unwrap(), 1);
        assert_eq!(idx.range_count_mbr_only(c, 0.0).unwrap().count, 1);
        // co-located facilities count with multiplicity
        assert_eq!(idx.range_count(Point2D::new(1.0, 1.0), 0.0).unwrap(), 2);
    }

    #[test]
    fn large_radius_counts_everything() {
        let f = pts(&(0..50).map(|i| ((i * 7 % 13) as f64, (i * 3 % 11) as f64)).collect::<Vec<_>>());
        let idx = FacilityIndex::build(&f, 4).unwrap();
        let full = idx.range_count_mbc(Point2D::new(5.0, 5.0), 1e3).unwrap();
        assert_eq!(full.count, 50);
        // the root's children are all covered, so nothing below them is opened
        assert_eq!(full.nodes_visited, 1);
        assert_eq!(idx.range_count_mbr_only(Point2D::new(5.0, 5.0), 1e3).unwrap().count, 50);
    }

    #[test]
    fn negative_radius_rejected() {
        let idx = FacilityIndex::build(&pts(&[(0.0, 0.0)]), 4).unwrap();
        assert!(idx.range_count(Point2D::new(0.0, 0.0), -1.0).is_err());
        assert!(idx.range_count_mbr_only(Point2D::new(0.0, 0.0), f64::NAN).is_err());
    }

    #[test]
    fn min_max_dist_corner_geometry() {
        let mbr = Mbr::new(1.0, 1.0, 2.0, 2.0);
        let o = Point2D::new(0.0, 0.0);
        assert!((min_dist(&o, &mbr) - 2f64.sqrt()).abs() < 1e-15);
        assert!((max_dist(&o, &mbr) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(min_dist(&Point2D::new(1.5, 1.2), &mbr), 0.0);
    }

    #[test]
    fn min_dist_matches_boundary_sampling() {
        let mut rng = Pcg64::seed_from_u64(7);
        for _ in 0..200 {
            let (x0, y0) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let mbr = Mbr::new(x0, y0, x0 + rng.random_range(0.0..3.0), y0 + rng.random_range(0.0..3.0));
            let c = Point2D::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let samples = 20_000;
            let mut best = f64::INFINITY;
            let mut worst: f64 = 0.0;
            for i in 0..=samples {
                let t = i as f64 / samples as f64;
                let xs = mbr.min_x + t * (mbr.max_x - mbr.min_x);
                let ys = mbr.min_y + t * (mbr.max_y - mbr.min_y);
                for p in [
                    Point2D::new(xs, mbr.min_y),
                    Point2D::new(xs, mbr.max_y),
                    Point2D::new(mbr.min_x, ys),
                    Point2D::new(mbr.max_x, ys),
                ] {
                    best = best.min(c.distance(&p));
                    worst = worst.max(c.distance(&p));
                }
            }
            if mbr.contains_point(&c) {
                best = 0.0;
            }
            assert!((min_dist(&c, &mbr) - best).abs() < 1e-6, "{c:?} {mbr:?}");
            assert!((max_dist(&c, &mbr) - worst).abs() < 1e-6);
            assert!(min_dist(&c, &mbr) <= max_dist(&c, &mbr));
        }
    }

    #[test]
    fn random_probes_match_linear_scan() {
        let mut rng = Pcg64::seed_from_u64(11);
        let f: Vec<_> = (0..200)
            .map(|i| (VertexId(i), Point2D::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))))
            .collect();
        let idx = FacilityIndex::build(&f, 16).unwrap();
        idx.audit().unwrap();
        for _ in 0..100 {
            let c = Point2D::new(rng.random_range(-10.0..110.0), rng.random_range(-10.0..110.0));
            let r = rng.random_range(0.0..60.0);
            let expected = linear_count(&f, c, r);
            let mbc = idx.range_count_mbc(c, r).unwrap();
            let mbr = idx.range_count_mbr_only(c, r).unwrap();
            assert_eq!(mbc.count, expected);
            assert_eq!(mbr.count, expected);
            assert!(mbc.nodes_visited <= mbr.nodes_visited);
        }
    }

    #[test]
    fn clustered_probe_visits_fewer_nodes_with_mbc() {
        let mut rng = Pcg64::seed_from_u64(3);
        let mut f = Vec::new();
        for c in 0..8 {
            let (cx, cy) = ((c % 4) as f64 * 250.0, (c / 4) as f64 * 250.0);
            for _ in 0..250 {
                let id = VertexId(f.len() as u32);
                f.push((id, Point2D::new(cx + rng.random_range(0.0..20.0), cy + rng.random_range(0.0..20.0))));
            }
        }
        let idx = FacilityIndex::build(&f, 8).unwrap();
        let (mut mbc_total, mut mbr_total) = (0, 0);
        for c in 0..8 {
            let center = Point2D::new((c % 4) as f64 * 250.0 + 10.0, (c / 4) as f64 * 250.0 + 10.0);
            let a = idx.range_count_mbc(center, 30.0).unwrap();
            let b = idx.range_count_mbr_only(center, 30.0).unwrap();
            assert_eq!(a.count, 250);
            assert_eq!(a.count, b.count);
            assert!(a.nodes_visited <= b.nodes_visited);
            mbc_total += a.nodes_visited;
            mbr_total += b.nodes_visited;
        }
        assert!(mbc_total < mbr_total, "{mbc_total} vs {mbr_total}");
    }

    #[test]
    fn dump_is_deterministic() {
        let f = pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let idx = FacilityIndex::build(&f, 2).unwrap();
        let expected = "\
node count=3 mbr=[0, 1]x[0, 1]
  leaf count=2 mbr=[0, 1]x[0, 0]
    f 0 (0, 0)
    f 1 (1, 0)
  leaf count=1 mbr=[0, 0]x[1, 1]
    f 2 (0, 1)
";
        assert_eq!(idx.dump(), expected);
        assert_eq!(FacilityIndex::build(&f, 2).unwrap().dump(), expected);
    }
}
