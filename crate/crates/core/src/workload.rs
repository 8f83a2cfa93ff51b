//! Seeded workload generation and the plain-text object / query files.
//!
//! All randomness comes from `Pcg64` (PCG-XSL-RR 128/64) seeded with
//! `seed_from_u64(seed)`. Draws happen in a fixed order: the facility sample
//! (only in [`FacilityMode::Sample`]), then the query facilities, then for
//! each object its edge followed by its offset.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::Serialize;

use crate::engine::{MovingObject, ObjectId, QuerySpec};
use crate::error::{Error, Result};
use crate::roadnet::{RoadNetwork, VertexId};

pub const DEFAULT_BATCH_SIZE: usize = 100;
pub const DEFAULT_NUM_OBJECTS: usize = 100_000;
pub const DEFAULT_K: usize = 10;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub enum FacilityMode {
    AllVertices,
    /// Uniform sample of `round(fraction · |V|)` vertices (at least one).
    Sample(f64),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Placement {
    /// Every edge equally likely, regardless of length.
    UniformEdges,
    /// Edge chosen with probability proportional to its weight.
    LengthWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub num_objects: usize,
    pub batch_size: usize,
    pub k: usize,
    pub facility_mode: FacilityMode,
    pub placement: Placement,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            seed: 0,
            num_objects: DEFAULT_NUM_OBJECTS,
            batch_size: DEFAULT_BATCH_SIZE,
            k: DEFAULT_K,
            facility_mode: FacilityMode::AllVertices,
            placement: Placement::UniformEdges,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Workload {
    pub objects: Vec<MovingObject>,
    pub spec: QuerySpec,
}

pub fn generate(net: &RoadNetwork, ws: &WorkloadSpec) -> Result<Workload> {
    let n = net.num_vertices();
    let mut rng = Pcg64::seed_from_u64(ws.seed);

    let facilities: Vec<VertexId> = match ws.facility_mode {
        FacilityMode::AllVertices => (0..n as u32).map(VertexId).collect(),
        FacilityMode::Sample(fraction) => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid(format!("facility fraction {fraction} outside (0, 1]")));
            }
            let count = ((fraction * n as f64).round() as usize).clamp(1, n.max(1));
            if n == 0 {
                Vec::new()
            } else {
                let mut picked: Vec<VertexId> =
                    sample(&mut rng, n, count).into_iter().map(|i| VertexId(i as u32)).collect();
                picked.sort_unstable();
                picked
            }
        }
    };
    if ws.batch_size > facilities.len() {
        return Err(Error::invalid(format!(
            "batch size {} exceeds {} facilities",
            ws.batch_size,
            facilities.len()
        )));
    }
    let queries: Vec<VertexId> = sample(&mut rng, facilities.len(), ws.batch_size)
        .into_iter()
        .map(|i| facilities[i])
        .collect();
    let spec = QuerySpec::new(net, queries, ws.k, facilities)?;

    if ws.num_objects > 0 && net.num_edges() == 0 {
        return Err(Error::invalid("cannot place objects on a network without edges"));
    }
    let weighted = match ws.placement {
        Placement::UniformEdges => None,
        Placement::LengthWeighted if ws.num_objects > 0 => Some(
            WeightedIndex::new(net.edges().iter().map(|e| e.weight))
                .map_err(|e| Error::invalid(format!("edge weights: {e}")))?,
        ),
        Placement::LengthWeighted => None,
    };
    let mut objects = Vec::with_capacity(ws.num_objects);
    for i in 0..ws.num_objects {
        let e = match &weighted {
            Some(dist) => dist.sample(&mut rng),
            None => rng.random_range(0..net.num_edges()),
        };
        let edge = net.edges()[e];
        let offset = rng.random::<f64>() * edge.weight;
        objects.push(MovingObject {
            id: ObjectId(i as u64),
            u: edge.u,
            v: edge.v,
            offset,
        });
    }
    Ok(Workload { objects, spec })
}

/// Writes `objects <count>` then `o <id> <u> <v> <offset>` with 1-based
/// vertex ids.
pub fn save_objects<W: Write>(objects: &[MovingObject], mut out: W) -> Result<()> {
    writeln!(out, "objects {}", objects.len())?;
    for m in objects {
        writeln!(out, "o {} {} {} {}", m.id, m.u.one_based(), m.v.one_based(), m.offset)?;
    }
    Ok(())
}

/// Writes `queries <count> k=<k>` then `q <vertex>` with 1-based ids.
pub fn save_queries<W: Write>(queries: &[VertexId], k: usize, mut out: W) -> Result<()> {
    writeln!(out, "queries {} k={}", queries.len(), k)?;
    for q in queries {
        writeln!(out, "q {}", q.one_based())?;
    }
    Ok(())
}

/// Writes `facilities <count>` then `f <vertex>` with 1-based ids.
pub fn save_facilities<W: Write>(facilities: &[VertexId], mut out: W) -> Result<()> {
    writeln!(out, "facilities {}", facilities.len())?;
    for f in facilities {
        writeln!(out, "f {}", f.one_based())?;
    }
    Ok(())
}

/// Content lines with their 1-based line numbers; blank and `c` comment
/// lines are skipped.
fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(Error::from))
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim_start();
                !(t.is_empty() || t.starts_with("c ") || t == "c")
            }
            Err(_) => true,
        })
}

fn tok<T: std::str::FromStr>(t: Option<&str>, line: usize, what: &str) -> Result<T> {
    let t = t.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    t.parse().map_err(|_| Error::parse(line, format!("bad {what} '{t}'")))
}

fn vertex(t: Option<&str>, line: usize, net: &RoadNetwork) -> Result<VertexId> {
    let raw: u64 = tok(t, line, "vertex id")?;
    VertexId::from_one_based(raw)
        .filter(|v| net.contains(*v))
        .ok_or_else(|| Error::parse(line, format!("vertex {raw} out of range 1..={}", net.num_vertices())))
}

fn header<'a>(line: &'a str, lineno: usize, keyword: &str) -> Result<std::str::SplitAsciiWhitespace<'a>> {
    let mut f = line.split_ascii_whitespace();
    if f.next() != Some(keyword) {
        return Err(Error::parse(lineno, format!("expected '{keyword} <count>' header")));
    }
    Ok(f)
}

fn expect_count(found: usize, declared: usize, line: usize) -> Result<()> {
    if found != declared {
        return Err(Error::parse(line, format!("header declares {declared} records, found {found}")));
    }
    Ok(())
}

pub fn load_objects<R: BufRead>(net: &RoadNetwork, input: R) -> Result<Vec<MovingObject>> {
    let mut lines = content_lines(input);
    let (hl, h) = lines.next().transpose()?.ok_or_else(|| Error::parse(1, "empty objects file"))?;
    let declared: usize = tok(header(&h, hl, "objects")?.next(), hl, "count")?;
    let mut objects = Vec::with_capacity(declared.min(1 << 24));
    let mut last = hl;
    for item in lines {
        let (ln, line) = item?;
        last = ln;
        let mut f = line.split_ascii_whitespace();
        if f.next() != Some("o") {
            return Err(Error::parse(ln, "expected 'o <id> <u> <v> <offset>'"));
        }
        let id: u64 = tok(f.next(), ln, "object id")?;
        let u = vertex(f.next(), ln, net)?;
        let v = vertex(f.next(), ln, net)?;
        let offset: f64 = tok(f.next(), ln, "offset")?;
        if u >= v {
            return Err(Error::parse(ln, "edge endpoints must be listed lower id first"));
        }
        let m = MovingObject {
            id: ObjectId(id),
            u,
            v,
            offset,
        };
        m.edge_in(net).map_err(|e| Error::parse(ln, e.to_string()))?;
        objects.push(m);
    }
    expect_count(objects.len(), declared, last)?;
    Ok(objects)
}

/// Returns the query facilities and `k`.
pub fn load_queries<R: BufRead>(net: &RoadNetwork, input: R) -> Result<(Vec<VertexId>, usize)> {
    let mut lines = content_lines(input);
    let (hl, h) = lines.next().transpose()?.ok_or_else(|| Error::parse(1, "empty queries file"))?;
    let mut f = header(&h, hl, "queries")?;
    let declared: usize = tok(f.next(), hl, "count")?;
    let k: usize = match f.next().and_then(|t| t.strip_prefix("k=")) {
        Some(k) => tok(Some(k), hl, "k")?,
        None => return Err(Error::parse(hl, "expected 'queries <count> k=<k>'")),
    };
    let mut queries = Vec::with_capacity(declared.min(1 << 24));
    let mut last = hl;
    for item in lines {
        let (ln, line) = item?;
        last = ln;
        let mut f = line.split_ascii_whitespace();
        if f.next() != Some("q") {
            return Err(Error::parse(ln, "expected 'q <vertex>'"));
        }
        queries.push(vertex(f.next(), ln, net)?);
    }
    expect_count(queries.len(), declared, last)?;
    Ok((queries, k))
}

pub fn load_facilities<R: BufRead>(net: &RoadNetwork, input: R) -> Result<Vec<VertexId>> {
    let mut lines = content_lines(input);
    let (hl, h) = lines.next().transpose()?.ok_or_else(|| Error::parse(1, "empty facilities file"))?;
    let declared: usize = tok(header(&h, hl, "facilities")?.next(), hl, "count")?;
    let mut out = Vec::with_capacity(declared.min(1 << 24));
    let mut last = hl;
    for item in lines {
        let (ln, line) = item?;
        last = ln;
        let mut f = line.split_ascii_whitespace();
        if f.next() != Some("f") {
            return Err(Error::parse(ln, "expected 'f <vertex>'"));
        }
        out.push(vertex(f.next(), ln, net)?);
    }
    expect_count(out.len(), declared, last)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn net() -> RoadNetwork {
        synth::grid(6, 6, 1)
    }

    #[test]
    fn same_seed_same_bytes() {
        let net = net();
        let ws = WorkloadSpec {
            seed: 42,
            num_objects: 500,
            batch_size: 10,
            ..Default::default()
        };
        let render = |w: &Workload| {
            let mut buf = Vec::new();
            save_objects(&w.objects, &mut buf).unwrap();
            save_queries(w.spec.queries(), w.spec.k(), &mut buf).unwrap();
            buf
        };
        let a = generate(&net, &ws).unwrap();
        let b = generate(&net, &ws).unwrap();
        assert_eq!(render(&a), render(&b));
        let c = generate(&net, &WorkloadSpec { seed: 43, ..ws }).unwrap();
        assert_ne!(render(&a), render(&c));
    }

    #[test]
    fn zero_objects() {
        let w = generate(&net(), &WorkloadSpec { num_objects: 0, batch_size: 3, ..Default::default() }).unwrap();
        assert!(w.objects.is_empty());
        assert_eq!(w.spec.queries().len(), 3);
    }

    #[test]
    fn batch_larger_than_facilities_rejected() {
        let err = generate(&net(), &WorkloadSpec { batch_size: 37, num_objects: 1, ..Default::default() });
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn queries_are_distinct_facilities() {
        let net = net();
        let w = generate(
            &net,
            &WorkloadSpec {
                seed: 9,
                num_objects: 10,
                batch_size: 8,
                facility_mode: FacilityMode::Sample(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(w.spec.facilities().len(), 18);
        let mut q = w.spec.queries().to_vec();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 8);
        assert!(q.iter().all(|v| w.spec.is_facility(*v)));
    }

    #[test]
    fn offsets_within_edges() {
        let net = net();
        for placement in [Placement::UniformEdges, Placement::LengthWeighted] {
            let w = generate(&net, &WorkloadSpec { num_objects: 300, batch_size: 1, placement, ..Default::default() }).unwrap();
            for m in &w.objects {
                m.edge_in(&net).unwrap();
            }
        }
    }

    #[test]
    fn round_trip() {
        let net = net();
        let w = generate(&net, &WorkloadSpec { seed: 5, num_objects: 200, batch_size: 7, k: 3, ..Default::default() }).unwrap();
        let mut objs = Vec::new();
        save_objects(&w.objects, &mut objs).unwrap();
        assert_eq!(load_objects(&net, objs.as_slice()).unwrap(), w.objects);
        let mut qs = Vec::new();
        save_queries(w.spec.queries(), 3, &mut qs).unwrap();
        assert_eq!(load_queries(&net, qs.as_slice()).unwrap(), (w.spec.queries().to_vec(), 3));
        let mut fs = Vec::new();
        save_facilities(&w.spec.facilities()[..4], &mut fs).unwrap();
        assert_eq!(load_facilities(&net, fs.as_slice()).unwrap(), w.spec.facilities()[..4].to_vec());
    }

    #[test]
    fn hand_written_object() {
        let net = net();
        let e = net.edges()[0];
        let text = format!("objects 1\nc a comment\no 17 {} {} 0.25\n", e.u.one_based(), e.v.one_based());
        let objs = load_objects(&net, text.as_bytes()).unwrap();
        assert_eq!(
            objs,
            vec![MovingObject { id: ObjectId(17), u: e.u, v: e.v, offset: 0.25 }]
        );
    }

    #[test]
    fn offset_beyond_edge_rejected() {
        let net = net();
        let e = net.edges()[0];
        let text = format!("objects 1\no 0 {} {} {}\n", e.u.one_based(), e.v.one_based(), e.weight + 1.0);
        assert!(matches!(load_objects(&net, text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn malformed_files() {
        let net = net();
        assert!(matches!(load_objects(&net, &b"objects 2\no 0 1 2 0.5\n"[..]), Err(Error::Parse { .. })));
        assert!(matches!(load_queries(&net, &b"queries 1\nq 1\n"[..]), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_queries(&net, &b"queries 1 k=2\nq 999\n"[..]), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_objects(&net, &b"objects 1\nx 0 1 2 0.5\n"[..]), Err(Error::Parse { line: 2, .. })));
    }
}
