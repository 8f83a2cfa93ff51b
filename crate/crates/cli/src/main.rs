mod net;
mod report;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use roadnet_rknn::engine::BatchEngine;
use roadnet_rknn::oracle::rknn_oracle;
use roadnet_rknn::roadnet::default_metric_tolerance;
use roadnet_rknn::workload::{
    generate, save_facilities, save_objects, save_queries, FacilityMode, Placement, WorkloadSpec, DEFAULT_BATCH_SIZE,
    DEFAULT_K, DEFAULT_NUM_OBJECTS,
};
use roadnet_rknn::{BatchResult, EngineConfig, MovingObject, PruneMode, QuerySpec, RoadNetwork};
use serde::Serialize;

use net::{NetArgs, WorkloadArgs};
use report::{fmt_rate, sweep_row, write_results, RunReport, Timing, SWEEP_HEADER};

#[derive(Parser, Debug)]
#[command(name = "rknn", version, about = "Batch reverse k-nearest-neighbor queries on road networks")]
struct Cli {
    /// Seed for workload generation and synthetic networks
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a network, check the metric premise, optionally save a snapshot
    Load {
        #[command(flatten)]
        net: NetArgs,
        /// Snapshot output path
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate objects and query facilities
    Generate {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        gen: GenArgs,
        /// Output directory for objects.txt, queries.txt (and facilities.txt)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a batch of reverse kNN queries
    Query {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Results file; results go to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force reference answers, same output format as `query`
    Oracle {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare Full, NoCache, w/o QV and MBR on one workload
    Ablate {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Vary one workload parameter and emit CSV
    Sweep {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values for the axis
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        /// CSV output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    #[arg(long, default_value_t = DEFAULT_NUM_OBJECTS)]
    num_objects: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Sample this fraction of vertices as facilities instead of all of them
    #[arg(long)]
    facility_fraction: Option<f64>,
    /// Pick object edges with probability proportional to length
    #[arg(long)]
    length_weighted: bool,
}

impl GenArgs {
    fn spec(&self, seed: u64) -> WorkloadSpec {
        WorkloadSpec {
            seed,
            num_objects: self.num_objects,
            batch_size: self.batch_size,
            k: self.k,
            facility_mode: self.facility_fraction.map_or(FacilityMode::AllVertices, FacilityMode::Sample),
            placement: if self.length_weighted {
                Placement::LengthWeighted
            } else {
                Placement::UniformEdges
            },
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RtreeMode {
    Mbc,
    Mbr,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Axis {
    BatchSize,
    K,
    NumObjects,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::BatchSize => "batch_size",
            Axis::K => "k",
            Axis::NumObjects => "num_objects",
        }
    }
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    no_quick_verify: bool,
    #[arg(long)]
    no_pruning: bool,
    #[arg(long, value_enum, default_value = "mbc")]
    rtree_mode: RtreeMode,
    /// Stop expanding a query beyond this network distance
    #[arg(long)]
    max_radius: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    tie_epsilon: f64,
    /// Process queries on a thread pool, one cache per worker
    #[arg(long)]
    parallel: bool,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        EngineConfig {
            quick_verify_enabled: !self.no_quick_verify,
            cache_enabled: !self.no_cache,
            pruning_enabled: !self.no_pruning,
            rtree_mode: match self.rtree_mode {
                RtreeMode::Mbc => PruneMode::Mbc,
                RtreeMode::Mbr => PruneMode::Mbr,
            },
            max_search_radius: self.max_radius,
            tie_epsilon: self.tie_epsilon,
            parallel: self.parallel,
            ..Default::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Load { net, out: snapshot } => cmd_load(&cli, net, snapshot.as_ref(), &mut out),
        Command::Generate { net, gen, out: dir } => cmd_generate(&cli, net, gen, dir, &mut out),
        Command::Query {
            net,
            workload,
            engine,
            out: path,
        } => cmd_query(&cli, net, workload, engine, path.as_ref(), &mut out),
        Command::Oracle { net, workload, out: path } => cmd_oracle(&cli, net, workload, path.as_ref(), &mut out),
        Command::Ablate { net, workload, engine } => cmd_ablate(&cli, net, workload, engine, &mut out),
        Command::Sweep {
            net,
            gen,
            engine,
            axis,
            values,
            out: path,
        } => cmd_sweep(&cli, net, gen, engine, *axis, values, path.as_ref(), &mut out),
    }
}

fn print_json<T: Serialize>(out: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

#[derive(Serialize)]
struct LoadReport {
    vertices: usize,
    edges: usize,
    dimacs_arcs: Option<u64>,
    coord_scale: f64,
    stretch: f64,
    metric_ok: bool,
    metric: roadnet_rknn::roadnet::MetricReport,
    load_s: f64,
}

fn cmd_load(cli: &Cli, args: &NetArgs, snapshot: Option<&PathBuf>, out: &mut impl Write) -> Result<()> {
    let start = Instant::now();
    let loaded = args.load(cli.seed)?;
    let load_s = start.elapsed().as_secs_f64();
    let net = &loaded.net;
    let metric = net.validate_metric(default_metric_tolerance(net));
    if let Some(path) = snapshot {
        let mut w = create(path)?;
        net.write_snapshot(&mut w)?;
        w.flush()?;
    }
    let report = LoadReport {
        vertices: net.num_vertices(),
        edges: net.num_edges(),
        dimacs_arcs: loaded.arcs,
        coord_scale: net.coord_scale(),
        stretch: net.stretch(),
        metric_ok: net.metric_ok(),
        metric,
        load_s,
    };
    if cli.json {
        return print_json(out, &report);
    }
    writeln!(out, "vertices {}", report.vertices)?;
    match report.dimacs_arcs {
        Some(arcs) => writeln!(out, "edges {} (undirected; {} DIMACS arcs)", report.edges, arcs)?,
        None => writeln!(out, "edges {}", report.edges)?,
    }
    writeln!(out, "coord_scale {}", report.coord_scale)?;
    let m = &report.metric;
    writeln!(
        out,
        "metric {}: {} of {} edges shorter than their Euclidean span (tolerance {:e}, stretch {:.6})",
        if m.is_ok() { "ok" } else { "violated" },
        m.violations,
        m.edges_checked,
        m.tolerance,
        m.stretch
    )?;
    for e in &m.violating_edges {
        writeln!(out, "  violating edge {} {} weight {}", e.u.one_based(), e.v.one_based(), e.weight)?;
    }
    writeln!(out, "load {:.3} s", load_s)?;
    Ok(())
}

fn cmd_generate(cli: &Cli, args: &NetArgs, gen: &GenArgs, dir: &PathBuf, out: &mut impl Write) -> Result<()> {
    let net = args.load(cli.seed)?.net;
    let ws = gen.spec(cli.seed);
    let wl = generate(&net, &ws)?;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut w = create(&dir.join("objects.txt"))?;
    save_objects(&wl.objects, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("queries.txt"))?;
    save_queries(wl.spec.queries(), wl.spec.k(), &mut w)?;
    w.flush()?;
    if gen.facility_fraction.is_some() {
        let mut w = create(&dir.join("facilities.txt"))?;
        save_facilities(wl.spec.facilities(), &mut w)?;
        w.flush()?;
    }
    if cli.json {
        return print_json(out, &ws);
    }
    writeln!(
        out,
        "wrote {} objects, {} queries (k={}) over {} facilities to {}",
        wl.objects.len(),
        wl.spec.queries().len(),
        wl.spec.k(),
        wl.spec.facilities().len(),
        dir.display()
    )?;
    Ok(())
}

fn execute(
    variant: &str,
    net: &RoadNetwork,
    spec: &QuerySpec,
    objects: &[MovingObject],
    config: EngineConfig,
    load_s: f64,
) -> Result<(BatchResult, RunReport)> {
    let start = Instant::now();
    let engine = BatchEngine::new(net, spec, objects, config.clone())?;
    let build_s = start.elapsed().as_secs_f64();
    let result = engine.run()?;
    let report = RunReport {
        variant: variant.to_string(),
        config,
        k: spec.k(),
        num_objects: objects.len(),
        num_facilities: spec.facilities().len(),
        result_sizes: result.queries.iter().map(|q| q.objects.len()).collect(),
        total_results: result.total_results(),
        cache_hit_rate: result.counters.cache_hit_rate(),
        counters: result.counters.clone(),
        timing: Timing {
            load_s,
            build_s,
            query_s: result.wall_time.as_secs_f64(),
        },
    };
    Ok((result, report))
}

fn load_inputs(cli: &Cli, net: &NetArgs, workload: &WorkloadArgs) -> Result<(RoadNetwork, QuerySpec, Vec<MovingObject>, f64)> {
    let start = Instant::now();
    let net = net.load(cli.seed)?.net;
    let (spec, objects) = workload.load(&net)?;
    Ok((net, spec, objects, start.elapsed().as_secs_f64()))
}

fn cmd_query(
    cli: &Cli,
    args: &NetArgs,
    workload: &WorkloadArgs,
    engine: &EngineArgs,
    path: Option<&PathBuf>,
    out: &mut impl Write,
) -> Result<()> {
    let (net, spec, objects, load_s) = load_inputs(cli, args, workload)?;
    let (result, report) = execute("query", &net, &spec, &objects, engine.config(), load_s)?;
    if let Some(path) = path {
        let mut w = create(path)?;
        write_results(&mut w, result.result_sets())?;
        w.flush()?;
    } else if !cli.json {
        write_results(out, result.result_sets())?;
    }
    if cli.json {
        return print_json(out, &report);
    }
    for line in report.summary() {
        writeln!(out, "c {line}")?;
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, args: &NetArgs, workload: &WorkloadArgs, path: Option<&PathBuf>, out: &mut impl Write) -> Result<()> {
    let (net, spec, objects, _) = load_inputs(cli, args, workload)?;
    let start = Instant::now();
    let answer = rknn_oracle(&net, &spec, &objects)?;
    let elapsed = start.elapsed().as_secs_f64();
    let sets: Vec<Vec<_>> = spec.queries().iter().map(|q| answer[q].iter().copied().collect()).collect();
    let rows = spec.queries().iter().copied().zip(sets.iter().map(|s| s.as_slice()));
    match path {
        Some(path) => {
            let mut w = create(path)?;
            write_results(&mut w, rows)?;
            w.flush()?;
        }
        None if !cli.json => write_results(out, rows)?,
        None => {}
    }
    if cli.json {
        #[derive(Serialize)]
        struct OracleReport {
            k: usize,
            result_sizes: Vec<usize>,
            total_results: usize,
            oracle_s: f64,
        }
        let sizes: Vec<usize> = sets.iter().map(Vec::len).collect();
        return print_json(
            out,
            &OracleReport {
                k: spec.k(),
                total_results: sizes.iter().sum(),
                result_sizes: sizes,
                oracle_s: elapsed,
            },
        );
    }
    writeln!(out, "c oracle: {} queries, {:.6} s", spec.queries().len(), elapsed)?;
    Ok(())
}

fn cmd_ablate(cli: &Cli, args: &NetArgs, workload: &WorkloadArgs, engine: &EngineArgs, out: &mut impl Write) -> Result<()> {
    let (net, spec, objects, load_s) = load_inputs(cli, args, workload)?;
    let full = engine.config();
    let variants = [
        ("Full", full.clone()),
        (
            "NoCache",
            EngineConfig {
                cache_enabled: false,
                ..full.clone()
            },
        ),
        (
            "w/o QV",
            EngineConfig {
                quick_verify_enabled: false,
                ..full.clone()
            },
        ),
        (
            "MBR",
            EngineConfig {
                rtree_mode: PruneMode::Mbr,
                ..full
            },
        ),
    ];
    let mut reports = Vec::new();
    let mut reference: Option<BatchResult> = None;
    for (name, config) in variants {
        let (result, report) = execute(name, &net, &spec, &objects, config, load_s)?;
        match &reference {
            Some(r) if r.result_sets() != result.result_sets() => {
                bail!("variant {name} returned different result sets than Full")
            }
            Some(_) => {}
            None => reference = Some(result),
        }
        reports.push(report);
    }
    if cli.json {
        return print_json(out, &reports);
    }
    writeln!(out, "{:<8} {:>10} {:>10} {:>8} {:>10} {:>10}", "variant", "time_s", "sssp_ops", "hit", "r_nodes", "results")?;
    for r in &reports {
        writeln!(
            out,
            "{:<8} {:>10.6} {:>10} {:>8} {:>10} {:>10}",
            r.variant,
            r.timing.query_s,
            r.counters.sssp_runs,
            fmt_rate(r.cache_hit_rate),
            r.counters.rtree_nodes_visited,
            r.total_results
        )?;
    }
    writeln!(out, "all variants returned identical result sets")?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    cli: &Cli,
    args: &NetArgs,
    gen: &GenArgs,
    engine: &EngineArgs,
    axis: Axis,
    values: &[usize],
    path: Option<&PathBuf>,
    out: &mut impl Write,
) -> Result<()> {
    let net = args.load(cli.seed)?.net;
    let config = engine.config();
    let mut rows = vec![SWEEP_HEADER.to_string()];
    let mut reports = Vec::new();
    for &value in values {
        let mut g = gen.clone();
        match axis {
            Axis::BatchSize => g.batch_size = value,
            Axis::K => g.k = value,
            Axis::NumObjects => g.num_objects = value,
        }
        let wl = generate(&net, &g.spec(cli.seed))?;
        let variant = format!("{}={value}", axis.name());
        let (result, report) = execute(&variant, &net, &wl.spec, &wl.objects, config.clone(), 0.0)?;
        rows.push(sweep_row(axis.name(), value, &result));
        reports.push(report);
    }
    match path {
        Some(path) => {
            let mut w = create(path)?;
            for row in &rows {
                writeln!(w, "{row}")?;
            }
            w.flush()?;
        }
        None if !cli.json => {
            for row in &rows {
                writeln!(out, "{row}")?;
            }
        }
        None => {}
    }
    if cli.json {
        return print_json(out, &reports);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn engine_flags_map_to_config() {
        let cli = Cli::parse_from([
            "rknn", "query", "--grid", "3x3", "--objects", "o", "--queries", "q", "--no-cache", "--rtree-mode", "mbr",
        ]);
        let Command::Query { engine, .. } = cli.command else {
            panic!("expected query");
        };
        let c = engine.config();
        assert!(!c.cache_enabled);
        assert!(c.quick_verify_enabled);
        assert_eq!(c.rtree_mode, PruneMode::Mbr);
    }

    #[test]
    fn scale_parsing() {
        assert!(matches!("fit".parse(), Ok(net::Scale::Fit)));
        assert!(matches!("none".parse(), Ok(net::Scale::None)));
        assert!(matches!("0.5".parse(), Ok(net::Scale::Factor(f)) if f == 0.5));
        assert!("-1".parse::<net::Scale>().is_err());
        assert!("3x".parse::<net::GridSize>().is_err());
    }
}
