use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use roadnet_rknn::roadnet::load_dimacs;
use roadnet_rknn::synth;
use roadnet_rknn::workload::{load_facilities, load_objects, load_queries};
use roadnet_rknn::{CoordScaling, MovingObject, QuerySpec, RoadNetwork};

/// Where the road network comes from. Exactly one of `--gr/--co`,
/// `--snapshot` or `--grid` must be given.
#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// DIMACS distance graph (.gr)
    #[arg(long, requires = "co")]
    pub gr: Option<PathBuf>,
    /// DIMACS coordinates (.co)
    #[arg(long, requires = "gr")]
    pub co: Option<PathBuf>,
    /// Coordinate scaling: `fit`, `none`, or a constant factor
    #[arg(long, default_value = "fit")]
    pub scale: Scale,
    /// Binary snapshot written by `load --out`
    #[arg(long, conflicts_with_all = ["gr", "co", "grid"])]
    pub snapshot: Option<PathBuf>,
    /// Synthetic jittered grid, e.g. `100x100` (uses --seed)
    #[arg(long, conflicts_with_all = ["gr", "co"])]
    pub grid: Option<GridSize>,
}

#[derive(Debug, Clone, Copy)]
pub enum Scale {
    Fit,
    None,
    Factor(f64),
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fit" => Ok(Scale::Fit),
            "none" => Ok(Scale::None),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|f| *f > 0.0 && f.is_finite())
                .map(Scale::Factor)
                .ok_or_else(|| format!("expected fit, none or a positive number, got '{s}'")),
        }
    }
}

impl From<Scale> for CoordScaling {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Fit => CoordScaling::AffineFit,
            Scale::None => CoordScaling::Identity,
            Scale::Factor(f) => CoordScaling::Constant(f),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridSize {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (r, c) = s.split_once('x').ok_or("expected ROWSxCOLS")?;
        let rows = r.parse().map_err(|_| format!("bad row count '{r}'"))?;
        let cols = c.parse().map_err(|_| format!("bad column count '{c}'"))?;
        if rows == 0 || cols == 0 {
            return Err("grid dimensions must be positive".into());
        }
        Ok(GridSize { rows, cols })
    }
}

pub struct Loaded {
    pub net: RoadNetwork,
    /// Arc count from the DIMACS header, when loaded from DIMACS.
    pub arcs: Option<u64>,
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

impl NetArgs {
    pub fn load(&self, seed: u64) -> Result<Loaded> {
        if let Some(path) = &self.snapshot {
            let net = RoadNetwork::read_snapshot(open(path)?)
                .with_context(|| format!("reading snapshot {}", path.display()))?;
            return Ok(Loaded { net, arcs: None });
        }
        if let Some(g) = self.grid {
            return Ok(Loaded {
                net: synth::grid(g.rows, g.cols, seed),
                arcs: None,
            });
        }
        let (Some(gr), Some(co)) = (&self.gr, &self.co) else {
            bail!("no network given: use --gr/--co, --snapshot or --grid");
        };
        let arcs = header_arcs(gr)?;
        let net = load_dimacs(open(gr)?, open(co)?, &self.scale.into())
            .with_context(|| format!("loading {} / {}", gr.display(), co.display()))?;
        Ok(Loaded { net, arcs })
    }
}

/// Reads the `p sp <n> <m>` line without parsing the arcs.
fn header_arcs(gr: &Path) -> Result<Option<u64>> {
    for line in open(gr)?.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("p ") {
            return Ok(rest.split_ascii_whitespace().nth(2).and_then(|m| m.parse().ok()));
        }
        if line.starts_with('a') {
            break;
        }
    }
    Ok(None)
}

/// Object, query and facility files for `query`, `oracle` and `ablate`.
#[derive(Args, Debug, Clone)]
pub struct WorkloadArgs {
    /// Objects file (`objects <n>` then `o <id> <u> <v> <offset>`)
    #[arg(long)]
    pub objects: PathBuf,
    /// Queries file (`queries <n> k=<k>` then `q <vertex>`)
    #[arg(long)]
    pub queries: PathBuf,
    /// Facilities file; every vertex is a facility when omitted
    #[arg(long)]
    pub facilities: Option<PathBuf>,
    /// Overrides the k stored in the queries file
    #[arg(long)]
    pub k: Option<usize>,
}

impl WorkloadArgs {
    pub fn load(&self, net: &RoadNetwork) -> Result<(QuerySpec, Vec<MovingObject>)> {
        let objects = load_objects(net, open(&self.objects)?)
            .with_context(|| format!("reading {}", self.objects.display()))?;
        let (queries, k) =
            load_queries(net, open(&self.queries)?).with_context(|| format!("reading {}", self.queries.display()))?;
        let k = self.k.unwrap_or(k);
        let spec = match &self.facilities {
            Some(path) => {
                let f = load_facilities(net, open(path)?).with_context(|| format!("reading {}", path.display()))?;
                QuerySpec::new(net, queries, k, f)?
            }
            None => QuerySpec::all_vertices(net, queries, k)?,
        };
        Ok((spec, objects))
    }
}
