//! Road network container: planar vertex coordinates, undirected weighted
//! edges in compressed adjacency form, DIMACS loading, and the check that
//! edge weights never undercut the straight-line span of their endpoints.
//!
//! Every Euclidean shortcut elsewhere in the crate (quick verification,
//! pruning pre-checks) leans on `ED(a, b) <= SD(a, b)`. The network records
//! whether that premise was verified ([`RoadNetwork::metric_ok`]) together
//! with the largest observed `ED / w` ratio ([`RoadNetwork::stretch`]), which
//! callers use to inflate Euclidean radii so that small, tolerated violations
//! can never make a shortcut unsound.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Converts a 1-based id as used in DIMACS and workload files.
    pub fn from_one_based(id: u64) -> Option<Self> {
        id.checked_sub(1)
            .and_then(|v| u32::try_from(v).ok())
            .map(VertexId)
    }

    pub fn one_based(self) -> u64 {
        self.0 as u64 + 1
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for VertexId {
    fn from(v: u32) -> Self {
        VertexId(v)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Default, Serialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    #[inline]
    pub fn lerp(&self, other: &Point2D, t: f64) -> Point2D {
        Point2D {
            x: self.x + (other.x - self.x) * t,
            y: self.y + (other.y - self.y) * t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Undirected edge in canonical orientation (`u < v`).
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub weight: f64,
}

/// Index into [`RoadNetwork::edges`].
pub type EdgeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub enum CoordScaling {
    /// Use raw coordinates unchanged.
    Identity,
    /// Multiply every coordinate by a constant.
    Constant(f64),
    /// Least-squares fit of `w ≈ s·ED_raw`, then shrunk so that no edge is
    /// shorter than its scaled Euclidean span.
    AffineFit,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub edges_checked: usize,
    pub violations: usize,
    /// First few violating edges, capped at [`MetricReport::MAX_LISTED`].
    pub violating_edges: Vec<Edge>,
    pub tolerance: f64,
    /// Largest `ED(P(u), P(v)) / w(e)` over all edges; at least 1.
    pub stretch: f64,
}

impl MetricReport {
    pub const MAX_LISTED: usize = 16;

    pub fn violation_ratio(&self) -> f64 {
        if self.edges_checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.edges_checked as f64
        }
    }

    pub fn is_ok(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoadNetwork {
    coords: Vec<Point2D>,
    edges: Vec<Edge>,
    // CSR adjacency: arcs of vertex i live in offsets[i]..offsets[i + 1]
    offsets: Vec<u32>,
    targets: Vec<VertexId>,
    arc_weights: Vec<f64>,
    arc_edges: Vec<EdgeId>,
    metric_ok: bool,
    stretch: f64,
    scale: f64,
}

impl RoadNetwork {
    /// Builds a network from coordinates and an arbitrary edge list.
    ///
    /// Reversed and repeated edges collapse into one undirected edge keeping
    /// the minimum weight; self-loops are dropped. The metric premise is
    /// checked with [`default_metric_tolerance`].
    pub fn from_edges<I>(coords: Vec<Point2D>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (VertexId, VertexId, f64)>,
    {
        let n = coords.len();
        if n > u32::MAX as usize {
            return Err(Error::invalid("too many vertices"));
        }
        if let Some(i) = coords.iter().position(|p| !p.is_finite()) {
            return Err(Error::invalid(format!("vertex {i} has non-finite coordinates")));
        }
        let mut canonical: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            for x in [a, b] {
                if x.index() >= n {
                    return Err(Error::VertexOutOfRange(x));
                }
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight { line: 0, weight: w });
            }
            if a == b {
                continue;
            }
            let key = if a < b { (a.0, b.0) } else { (b.0, a.0) };
            canonical
                .entry(key)
                .and_modify(|cur| *cur = cur.min(w))
                .or_insert(w);
        }
        let edges: Vec<Edge> = canonical
            .into_iter()
            .map(|((u, v), weight)| Edge {
                u: VertexId(u),
                v: VertexId(v),
                weight,
            })
            .collect();
        let mut net = Self::assemble(coords, edges, 1.0);
        net.check_metric(default_metric_tolerance(&net));
        Ok(net)
    }

    fn assemble(coords: Vec<Point2D>, edges: Vec<Edge>, scale: f64) -> Self {
        let n = coords.len();
        let mut degree = vec![0u32; n + 1];
        for e in &edges {
            degree[e.u.index()] += 1;
            degree[e.v.index()] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let arcs = offsets[n] as usize;
        let mut cursor = offsets.clone();
        let mut targets = vec![VertexId(0); arcs];
        let mut arc_weights = vec![0.0; arcs];
        let mut arc_edges = vec![0; arcs];
        for (id, e) in edges.iter().enumerate() {
            for (from, to) in [(e.u, e.v), (e.v, e.u)] {
                let slot = cursor[from.index()] as usize;
                targets[slot] = to;
                arc_weights[slot] = e.weight;
                arc_edges[slot] = id as EdgeId;
                cursor[from.index()] += 1;
            }
        }
        RoadNetwork {
            coords,
            edges,
            offsets,
            targets,
            arc_weights,
            arc_edges,
            metric_ok: false,
            stretch: f64::INFINITY,
            scale,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn coords(&self) -> &[Point2D] {
        &self.coords
    }

    #[inline]
    pub fn coord(&self, v: VertexId) -> Point2D {
        self.coords[v.index()]
    }

    pub fn metric_ok(&self) -> bool {
        self.metric_ok
    }

    /// Largest observed `ED / w` edge ratio (≥ 1). Any Euclidean distance
    /// between network points is at most `stretch` times their network
    /// distance.
    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    /// Factor applied to raw input coordinates at load time.
    pub fn coord_scale(&self) -> f64 {
        self.scale
    }

    pub fn max_edge_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.coords.len()
    }

    pub fn neighbors(&self, v: VertexId) -> Result<Neighbors<'_>> {
        if !self.contains(v) {
            return Err(Error::VertexOutOfRange(v));
        }
        Ok(self.arcs(v))
    }

    /// Unchecked adjacency access for hot loops.
    #[inline]
    pub(crate) fn arcs(&self, v: VertexId) -> Neighbors<'_> {
        let lo = self.offsets[v.index()] as usize;
        let hi = self.offsets[v.index() + 1] as usize;
        Neighbors {
            targets: &self.targets[lo..hi],
            weights: &self.arc_weights[lo..hi],
            edges: &self.arc_edges[lo..hi],
            pos: 0,
        }
    }

    pub fn degree(&self, v: VertexId) -> usize {
        (self.offsets[v.index() + 1] - self.offsets[v.index()]) as usize
    }

    /// Looks up the edge joining `a` and `b` in either orientation.
    pub fn find_edge(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        self.edges
            .binary_search_by(|e| (e.u, e.v).cmp(&(u, v)))
            .ok()
            .map(|i| i as EdgeId)
    }

    /// Reports edges with `w(e) < ED(P(u), P(v)) - tolerance`.
    pub fn validate_metric(&self, tolerance: f64) -> MetricReport {
        let mut violations = 0;
        let mut violating_edges = Vec::new();
        let mut stretch: f64 = 1.0;
        for e in &self.edges {
            let ed = self.coord(e.u).distance(&self.coord(e.v));
            stretch = stretch.max(ed / e.weight);
            if e.weight < ed - tolerance {
                violations += 1;
                if violating_edges.len() < MetricReport::MAX_LISTED {
                    violating_edges.push(*e);
                }
            }
        }
        MetricReport {
            edges_checked: self.edges.len(),
            violations,
            violating_edges,
            tolerance,
            stretch,
        }
    }

    /// Runs [`RoadNetwork::validate_metric`] and records the outcome on the
    /// network.
    pub fn check_metric(&mut self, tolerance: f64) -> MetricReport {
        let report = self.validate_metric(tolerance);
        self.metric_ok = report.is_ok();
        self.stretch = report.stretch;
        report
    }

    /// Writes a versioned little-endian binary snapshot.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(SNAPSHOT_MAGIC)?;
        out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        out.write_all(&(self.coords.len() as u64).to_le_bytes())?;
        out.write_all(&(self.edges.len() as u64).to_le_bytes())?;
        out.write_all(&self.scale.to_le_bytes())?;
        for p in &self.coords {
            out.write_all(&p.x.to_le_bytes())?;
            out.write_all(&p.y.to_le_bytes())?;
        }
        for e in &self.edges {
            out.write_all(&e.u.0.to_le_bytes())?;
            out.write_all(&e.v.0.to_le_bytes())?;
            out.write_all(&e.weight.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let n = read_u64(&mut input)? as usize;
        let m = read_u64(&mut input)? as usize;
        let scale = read_f64(&mut input)?;
        let mut coords = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let x = read_f64(&mut input)?;
            let y = read_f64(&mut input)?;
            coords.push(Point2D::new(x, y));
        }
        let mut edges = Vec::with_capacity(m.min(1 << 24));
        for _ in 0..m {
            let u = read_u32(&mut input)?;
            let v = read_u32(&mut input)?;
            let weight = read_f64(&mut input)?;
            if u >= v || v as usize >= n || weight.is_nan() || weight <= 0.0 {
                return Err(Error::Snapshot(format!("corrupt edge ({u}, {v}, {weight})")));
            }
            edges.push(Edge {
                u: VertexId(u),
                v: VertexId(v),
                weight,
            });
        }
        if edges.windows(2).any(|w| (w[0].u, w[0].v) >= (w[1].u, w[1].v)) {
            return Err(Error::Snapshot("edges not in canonical order".into()));
        }
        let mut net = Self::assemble(coords, edges, scale);
        net.check_metric(default_metric_tolerance(&net));
        Ok(net)
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"RKNNNET\0";
const SNAPSHOT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// `1e-6 × max edge weight`, absorbing rounding in scaled coordinates.
pub fn default_metric_tolerance(net: &RoadNetwork) -> f64 {
    1e-6 * net.max_edge_weight()
}

pub struct Neighbors<'a> {
    targets: &'a [VertexId],
    weights: &'a [f64],
    edges: &'a [EdgeId],
    pos: usize,
}

impl<'a> Neighbors<'a> {
    pub fn len(&self) -> usize {
        self.targets.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Edge ids of the remaining arcs, in adjacency order.
    pub fn edge_ids(&self) -> &'a [EdgeId] {
        &self.edges[self.pos..]
    }
}

impl Iterator for Neighbors<'_> {
    type Item = (VertexId, f64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        let i = self.pos;
        if i == self.targets.len() {
            return None;
        }
        self.pos += 1;
        Some((self.targets[i], self.weights[i]))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.len(), Some(self.len()))
    }
}

impl ExactSizeIterator for Neighbors<'_> {}

/// Parses a DIMACS distance graph (`.gr`) and coordinate file (`.co`).
///
/// Ids in the files are 1-based and become dense 0-based [`VertexId`]s.
/// Arcs collapse into undirected edges keeping the minimum weight.
pub fn load_dimacs<G: BufRead, C: BufRead>(
    gr: G,
    co: C,
    scaling: &CoordScaling,
) -> Result<RoadNetwork> {
    let (n, arcs) = parse_gr(gr)?;
    let raw = parse_co(co, n)?;

    let mut canonical: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (a, b, w) in arcs {
        if a == b {
            continue;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        canonical
            .entry(key)
            .and_modify(|cur| *cur = cur.min(w))
            .or_insert(w);
    }
    let edges: Vec<Edge> = canonical
        .into_iter()
        .map(|((u, v), weight)| Edge {
            u: VertexId(u),
            v: VertexId(v),
            weight,
        })
        .collect();

    let scale = match scaling {
        CoordScaling::Identity => 1.0,
        CoordScaling::Constant(s) => {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("scale factor {s} must be positive")));
            }
            *s
        }
        CoordScaling::AffineFit => fit_scale(&raw, &edges),
    };
    let coords = raw
        .into_iter()
        .map(|p| Point2D::new(p.x * scale, p.y * scale))
        .collect();
    let mut net = RoadNetwork::assemble(coords, edges, scale);
    net.check_metric(default_metric_tolerance(&net));
    Ok(net)
}

/// Least-squares `s` for `w ≈ s·ED_raw`, capped at `min w / ED_raw` so that
/// scaled Euclidean spans never exceed edge weights.
pub fn fit_scale(raw: &[Point2D], edges: &[Edge]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut cap = f64::INFINITY;
    for e in edges {
        let ed = raw[e.u.index()].distance(&raw[e.v.index()]);
        if ed > 0.0 {
            num += e.weight * ed;
            den += ed * ed;
            cap = cap.min(e.weight / ed);
        }
    }
    if den == 0.0 {
        return 1.0;
    }
    (num / den).min(cap)
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split_ascii_whitespace()
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} '{tok}'")))
}

type Arc = (u32, u32, f64);

fn parse_gr<R: BufRead>(input: R) -> Result<(usize, Vec<Arc>)> {
    let mut header: Option<(usize, usize)> = None;
    let mut arcs = Vec::new();
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let mut f = fields(&line);
        match f.next() {
            None | Some("c") => {}
            Some("p") => {
                if header.is_some() {
                    return Err(Error::parse(lineno, "duplicate problem line"));
                }
                if f.next() != Some("sp") {
                    return Err(Error::parse(lineno, "expected 'p sp <n> <m>'"));
                }
                let n: usize = parse_num(f.next(), lineno, "vertex count")?;
                let m: usize = parse_num(f.next(), lineno, "arc count")?;
                if n > u32::MAX as usize {
                    return Err(Error::parse(lineno, "vertex count too large"));
                }
                header = Some((n, m));
                arcs.reserve(m.min(1 << 26));
            }
            Some("a") => {
                let (n, _) = header.ok_or_else(|| Error::parse(lineno, "arc before problem line"))?;
                let a: u64 = parse_num(f.next(), lineno, "tail")?;
                let b: u64 = parse_num(f.next(), lineno, "head")?;
                let w: f64 = parse_num(f.next(), lineno, "weight")?;
                let to_id = |x: u64| {
                    VertexId::from_one_based(x)
                        .filter(|v| v.index() < n)
                        .ok_or_else(|| Error::parse(lineno, format!("vertex {x} out of range 1..={n}")))
                };
                let (a, b) = (to_id(a)?, to_id(b)?);
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::InvalidWeight {
                        line: lineno,
                        weight: w,
                    });
                }
                arcs.push((a.0, b.0, w));
            }
            Some(other) => {
                return Err(Error::parse(lineno, format!("unknown line type '{other}'")));
            }
        }
    }
    let (n, m) = header.ok_or_else(|| Error::parse(last_line, "missing 'p sp' problem line"))?;
    if arcs.len() != m {
        return Err(Error::parse(
            last_line,
            format!("header declares {m} arcs, found {}", arcs.len()),
        ));
    }
    Ok((n, arcs))
}

fn parse_co<R: BufRead>(input: R, n: usize) -> Result<Vec<Point2D>> {
    let mut coords: Vec<Option<Point2D>> = vec![None; n];
    let mut declared: Option<usize> = None;
    let mut last_line = 0;
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let mut f = fields(&line);
        match f.next() {
            None | Some("c") => {}
            Some("p") => {
                let toks: Vec<&str> = f.collect();
                if toks.len() != 4 || toks[..3] != ["aux", "sp", "co"] {
                    return Err(Error::parse(lineno, "expected 'p aux sp co <n>'"));
                }
                let count: usize = parse_num(Some(toks[3]), lineno, "vertex count")?;
                if count != n {
                    return Err(Error::parse(
                        lineno,
                        format!("coordinate file declares {count} vertices, graph has {n}"),
                    ));
                }
                declared = Some(count);
            }
            Some("v") => {
                let id: u64 = parse_num(f.next(), lineno, "vertex id")?;
                let x: f64 = parse_num(f.next(), lineno, "x")?;
                let y: f64 = parse_num(f.next(), lineno, "y")?;
                let v = VertexId::from_one_based(id)
                    .filter(|v| v.index() < n)
                    .ok_or_else(|| Error::parse(lineno, format!("vertex {id} out of range 1..={n}")))?;
                let p = Point2D::new(x, y);
                if !p.is_finite() {
                    return Err(Error::parse(lineno, "non-finite coordinate"));
                }
                coords[v.index()] = Some(p);
            }
            Some(other) => {
                return Err(Error::parse(lineno, format!("unknown line type '{other}'")));
            }
        }
    }
    if declared.is_none() {
        return Err(Error::parse(last_line, "missing 'p aux sp co' problem line"));
    }
    coords
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or(Error::MissingCoordinate(i + 1)))
        .collect()
}
