//! Experiment configuration: graph specs, list syntax and key-value files.
//!
//! Settings are layered as experiment defaults, then a config file, then
//! command-line flags. Every layer uses the same textual syntax.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use graph_ssns::graph::{
    build_grid, build_knn_from_points, build_ring, build_sensor, load_edge_list, swiss_roll,
};
use graph_ssns::rng::{derive_seed, SeedPart};
use graph_ssns::{Engine, Graph, PointCloud};

use crate::error::{CliError, CliResult};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_N: usize = 900;

/// Keys accepted in config files and as flags.
pub const KEYS: &[&str] = &[
    "graph", "n", "k", "r", "bits", "trials", "seed", "engine", "out", "samples", "mesh",
];

/// Which graph to build.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Ring { n: usize },
    Grid { h: usize, w: usize },
    /// Random geometric kNN graph on the unit square.
    Sensor { n: usize, k: usize },
    /// kNN graph on a seeded swiss-roll point cloud.
    SwissRoll { n: usize, k: usize },
    EdgeList { path: PathBuf },
    /// kNN graph on a point file (ASCII PLY or `x y z` lines).
    Points { path: PathBuf, k: usize },
}

impl GraphSpec {
    /// Parses `ring`, `grid`, `grid:HxW`, `sensor`, `swissroll`,
    /// `edgelist:PATH` or `points:PATH`; `n` and `k` fill in sizes.
    pub fn parse(text: &str, n: Option<usize>, k: Option<usize>) -> CliResult<Self> {
        let n_or = |d: usize| n.unwrap_or(d);
        let k = k.unwrap_or(DEFAULT_K);
        let (family, arg) = match text.split_once(':') {
            Some((f, a)) => (f, Some(a)),
            None => (text, None),
        };
        let spec = match (family, arg) {
            ("ring", None) => GraphSpec::Ring { n: n_or(DEFAULT_N) },
            ("grid", None) => {
                let n = n_or(DEFAULT_N);
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(CliError::Config(format!(
                        "grid needs a square n or an explicit grid:HxW, got n={n}"
                    )));
                }
                GraphSpec::Grid { h: side, w: side }
            }
            ("grid", Some(dims)) => {
                let (h, w) = dims
                    .split_once('x')
                    .ok_or_else(|| CliError::Config(format!("bad grid size '{dims}'")))?;
                GraphSpec::Grid {
                    h: parse_value("grid height", h)?,
                    w: parse_value("grid width", w)?,
                }
            }
            ("sensor", None) => GraphSpec::Sensor { n: n_or(DEFAULT_N), k },
            ("swissroll", None) => GraphSpec::SwissRoll { n: n_or(1500), k },
            ("edgelist", Some(p)) => GraphSpec::EdgeList { path: p.into() },
            ("points", Some(p)) | ("mesh", Some(p)) => GraphSpec::Points { path: p.into(), k },
            _ => {
                return Err(CliError::Config(format!(
                    "unknown graph '{text}' (expected ring, grid, grid:HxW, sensor, swissroll, edgelist:PATH or points:PATH)"
                )))
            }
        };
        Ok(spec)
    }

    /// Stable identifier used in CSV rows and seed derivation.
    pub fn id(&self) -> String {
        match self {
            GraphSpec::Ring { n } => format!("ring-{n}"),
            GraphSpec::Grid { h, w } => format!("grid-{h}x{w}"),
            GraphSpec::Sensor { n, k } => format!("sensor-{n}-k{k}"),
            GraphSpec::SwissRoll { n, k } => format!("swissroll-{n}-k{k}"),
            GraphSpec::EdgeList { path } => format!("edgelist-{}", file_stem(path)),
            GraphSpec::Points { path, k } => format!("points-{}-k{k}", file_stem(path)),
        }
    }

    pub fn build(&self, master_seed: u64) -> CliResult<BuiltGraph> {
        let id = self.id();
        let seed = derive_seed(master_seed, &[SeedPart::Label("graph"), SeedPart::Label(&id)]);
        let (graph, cloud) = match self {
            GraphSpec::Ring { n } => (build_ring(*n)?, None),
            GraphSpec::Grid { h, w } => (build_grid(*h, *w)?, None),
            GraphSpec::Sensor { n, k } => (build_sensor(*n, *k, seed)?, None),
            GraphSpec::SwissRoll { n, k } => {
                let cloud = swiss_roll(*n, seed);
                (build_knn_from_points(&cloud, *k)?, Some(cloud))
            }
            GraphSpec::EdgeList { path } => (load_edge_list(path)?, None),
            GraphSpec::Points { path, k } => {
                let cloud = PointCloud::load(path)?;
                (build_knn_from_points(&cloud, *k)?, Some(cloud))
            }
        };
        if !graph.is_connected() {
            log::warn!("graph {id} has {} components", graph.component_count());
        }
        Ok(BuiltGraph { id, graph, cloud })
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSpec::Ring { .. } => f.write_str("ring"),
            GraphSpec::Grid { h, w } => write!(f, "grid:{h}x{w}"),
            GraphSpec::Sensor { .. } => f.write_str("sensor"),
            GraphSpec::SwissRoll { .. } => f.write_str("swissroll"),
            GraphSpec::EdgeList { path } => write!(f, "edgelist:{}", path.display()),
            GraphSpec::Points { path, .. } => write!(f, "points:{}", path.display()),
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

pub struct BuiltGraph {
    pub id: String,
    pub graph: Graph,
    pub cloud: Option<PointCloud>,
}

/// The four experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Sweep,
    Bitdepth,
    Compare,
    Halftone,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Bitdepth => "bitdepth",
            ExperimentKind::Compare => "compare",
            ExperimentKind::Halftone => "halftone",
        }
    }

    fn defaults(self) -> Settings {
        let mut s = Settings::default();
        let pairs: &[(&str, &str)] = match self {
            ExperimentKind::Sweep => &[
                ("graph", "grid:30x30"),
                ("r", "15:155:10"),
                ("bits", "1,2,4"),
                ("trials", "20"),
            ],
            ExperimentKind::Bitdepth => &[
                ("graph", "grid:30x30"),
                ("r", "200"),
                ("bits", "1:8"),
                ("trials", "50"),
            ],
            ExperimentKind::Compare => &[("graph", "ring"), ("r", "15:155:10"), ("trials", "20")],
            ExperimentKind::Halftone => &[
                ("graph", "swissroll"),
                ("r", "20,50"),
                ("bits", "1"),
                ("trials", "1"),
            ],
        };
        for (k, v) in pairs {
            s.set(k, v).expect("default keys are valid");
        }
        s.set("seed", "2024").expect("valid");
        s.set("engine", "fast").expect("valid");
        s.set("out", "results").expect("valid");
        s
    }
}

/// Raw key-value settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key '{key}'")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Later layers win.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Settings> {
        let mut s = Settings::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", idx + 1))
            })?;
            s.set(k.trim(), v)
                .map_err(|e| CliError::Config(format!("line {}: {e}", idx + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> CliResult<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub graph: GraphSpec,
    pub bandwidths: Vec<usize>,
    /// Empty means the budget `⌈log₂ log₂ N⌉` (comparison only).
    pub bits: Vec<u32>,
    pub trials: usize,
    pub seed: u64,
    pub engine: Engine,
    pub out_dir: PathBuf,
    /// SSS-R sample count; `None` means `⌈N ln N⌉`.
    pub samples: Option<u64>,
    /// Resolved settings, echoed into the metadata sidecar.
    pub settings: Settings,
}

impl ExperimentConfig {
    /// Defaults for `kind`, overlaid with each layer in order.
    pub fn resolve(kind: ExperimentKind, layers: &[&Settings]) -> CliResult<Self> {
        let mut s = kind.defaults();
        for layer in layers {
            s.overlay(layer);
        }
        if let Some(mesh) = s.get("mesh").map(str::to_string) {
            s.set("graph", &format!("points:{mesh}"))?;
        }
        let opt_usize = |key: &str| -> CliResult<Option<usize>> {
            s.get(key).map(|v| parse_value(key, v)).transpose()
        };
        let graph = GraphSpec::parse(
            s.get("graph").unwrap_or("ring"),
            opt_usize("n")?,
            opt_usize("k")?,
        )?;
        let bandwidths = parse_list("r", s.get("r").unwrap_or(""))?;
        let bits: Vec<u32> = match s.get("bits") {
            Some(v) if !v.is_empty() && v != "budget" => parse_list::<u32>("bits", v)?,
            _ => Vec::new(),
        };
        let trials: usize = parse_value("trials", s.get("trials").unwrap_or("1"))?;
        let cfg = ExperimentConfig {
            kind,
            graph,
            bandwidths,
            bits,
            trials,
            seed: parse_value("seed", s.get("seed").unwrap_or("0"))?,
            engine: s
                .get("engine")
                .unwrap_or("fast")
                .parse()
                .map_err(|e: graph_ssns::Error| CliError::Config(e.to_string()))?,
            out_dir: PathBuf::from(s.get("out").unwrap_or("results")),
            samples: s.get("samples").map(|v| parse_value("samples", v)).transpose()?,
            settings: s,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if self.bandwidths.is_empty() || self.bandwidths.contains(&0) {
            return Err(CliError::Config("bandwidths must be positive".into()));
        }
        if self.bits.contains(&0) {
            return Err(CliError::Config("bit depths must be positive".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be positive".into()));
        }
        if self.kind != ExperimentKind::Compare && self.bits.is_empty() {
            return Err(CliError::Config("bit list is empty".into()));
        }
        Ok(())
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, text: &str) -> CliResult<T> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value '{text}' for {key}")))
}

/// Comma-separated items, each a value or an inclusive range `a:b` or
/// `a:b:step`. Duplicates are dropped and the result is sorted.
pub fn parse_list<T>(key: &str, text: &str) -> CliResult<Vec<T>>
where
    T: Copy + Ord + TryFrom<u64>,
{
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v: u64 = parse_value(key, v)?;
                out.push(T::try_from(v).map_err(|_| {
                    CliError::Config(format!("value {v} out of range for {key}"))
                })?);
            }
            [a, b] | [a, b, _] => {
                let start: u64 = parse_value(key, a)?;
                let end: u64 = parse_value(key, b)?;
                let step: u64 = match parts.get(2) {
                    Some(s) => parse_value(key, s)?,
                    None => 1,
                };
                if step == 0 || end < start {
                    return Err(CliError::Config(format!("bad range '{item}' for {key}")));
                }
                let mut v = start;
                while v <= end {
                    out.push(T::try_from(v).map_err(|_| {
                        CliError::Config(format!("value {v} out of range for {key}"))
                    })?);
                    v += step;
                }
            }
            _ => return Err(CliError::Config(format!("bad list item '{item}' for {key}"))),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
