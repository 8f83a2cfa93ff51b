use std::io::Write;

use anyhow::Result;
use roadnet_rknn::engine::Counters;
use roadnet_rknn::{BatchResult, EngineConfig, ObjectId, VertexId};
use serde::Serialize;

#[derive(Serialize, Debug)]
pub struct Timing {
    pub load_s: f64,
    /// Engine setup: object bucketing and R-tree build.
    pub build_s: f64,
    pub query_s: f64,
}

#[derive(Serialize, Debug)]
pub struct RunReport {
    pub variant: String,
    pub config: EngineConfig,
    pub k: usize,
    pub num_objects: usize,
    pub num_facilities: usize,
    pub result_sizes: Vec<usize>,
    pub total_results: usize,
    pub counters: Counters,
    pub cache_hit_rate: Option<f64>,
    pub timing: Timing,
}

impl RunReport {
    pub fn summary(&self) -> Vec<String> {
        let c = &self.counters;
        vec![
            format!(
                "{}: {} queries, {} results, query {:.6} s",
                self.variant,
                self.result_sizes.len(),
                self.total_results,
                self.timing.query_s
            ),
            format!(
                "sssp_runs {} cache_hits {} hit_rate {} quick {} full {} rtree_nodes {}",
                c.sssp_runs,
                c.cache_hits,
                fmt_rate(self.cache_hit_rate),
                c.quick_verify_hits,
                c.full_verifications,
                c.rtree_nodes_visited
            ),
            format!(
                "settled {} prune_probes {} pruned {}",
                c.vertices_settled, c.prune_probes, c.pruned_vertices
            ),
        ]
    }
}

pub fn fmt_rate(rate: Option<f64>) -> String {
    rate.map_or_else(|| "n/a".to_string(), |r| format!("{:.1}%", r * 100.0))
}

/// `r <facility> <object ids...>`, facilities 1-based, one line per query.
pub fn write_results<'a, W, I>(out: &mut W, rows: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (VertexId, &'a [ObjectId])>,
{
    for (q, objects) in rows {
        write!(out, "r {}", q.one_based())?;
        for m in objects {
            write!(out, " {m}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub const SWEEP_HEADER: &str = "axis,value,wall_time_s,sssp_runs,cache_hits,cache_hit_rate,quick_verify_hits,\
full_verifications,rtree_nodes_visited,vertices_settled,prune_probes,total_results";

pub fn sweep_row(axis: &str, value: usize, result: &BatchResult) -> String {
    let c = &result.counters;
    format!(
        "{axis},{value},{:.6},{},{},{},{},{},{},{},{},{}",
        result.wall_time.as_secs_f64(),
        c.sssp_runs,
        c.cache_hits,
        c.cache_hit_rate().map_or(String::new(), |r| format!("{r:.4}")),
        c.quick_verify_hits,
        c.full_verifications,
        c.rtree_nodes_visited,
        c.vertices_settled,
        c.prune_probes,
        result.total_results()
    )
}
