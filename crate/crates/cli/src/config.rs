//! Experiment files: TOML, or JSON when the file name ends in `.json`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use disperse_core::sim::Segment;
use disperse_core::{
    AdaptiveSettings, ArrivalModel, DelayKernel, Distance, GridSpec, Limits, Node, Priority, Schedule, SimConfig,
    Topology,
};
use serde::Deserialize;

use crate::failure::{io_err, Failure, Outcome};

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySection,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Probe priority for every node without its own setting.
    #[serde(default)]
    pub priority: Priority,
    pub nodes: Vec<NodeSpec>,
}

/// One queue. Give either `rate` (Poisson batches) or `pmf`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    /// Absent for the root, which must come first.
    pub parent: Option<String>,
    pub rate: Option<f64>,
    pub pmf: Option<Vec<f64>>,
    pub priority: Option<Priority>,
    /// Link from the parent; a fixed delay when absent.
    pub link: Option<DelayKernel>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSection {
    pub d0: usize,
    /// Per-slot launch probability of a pair.
    pub rate: f64,
    pub horizon: u64,
    pub seed: u64,
    pub block: usize,
    pub a: f64,
    pub warmup: Option<u64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            d0: 1,
            rate: 0.005,
            horizon: 2_000_000,
            seed: 1,
            block: 500,
            a: 0.05,
            warmup: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Grid,
    Adaptive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    /// Simulate the configured network.
    #[default]
    Simulate,
    /// Use the exact law at the configured rates.
    Analytic,
    /// Read a samples CSV written by `simulate`.
    Samples,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub mode: Mode,
    pub distance: Distance,
    pub input: Input,
    /// Samples file for `input = "samples"`, relative to the config file.
    pub samples: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub initial: Option<Vec<f64>>,
    pub adaptive: AdaptiveSection,
    /// Upper bound on the estimated work of a grid, in basic operations.
    pub budget: f64,
    /// Columns on each side of the minimum used for the valley fit.
    pub valley_half_width: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            mode: Mode::Grid,
            distance: Distance::Euclidean,
            input: Input::Simulate,
            samples: None,
            grid: None,
            initial: None,
            adaptive: AdaptiveSection::default(),
            budget: 1e11,
            valley_half_width: 0.15,
        }
    }
}

/// Step-size controls; block size and blending weight come from `probe`.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptiveSection {
    pub alpha0: Option<f64>,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub decrease: Option<f64>,
    pub increase: Option<f64>,
    pub grad_threshold: Option<f64>,
    pub h: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub node: String,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Output directory, relative to the working directory.
    pub dir: PathBuf,
    /// Write the samples CSV from `simulate`.
    pub samples: bool,
    /// Write the cost surface from a grid `estimate`.
    pub surface: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            samples: true,
            surface: false,
        }
    }
}

/// A parsed config and the directory it was read from.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub base: PathBuf,
}

pub fn load(path: &Path) -> Outcome<Loaded> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let config = parse(&text, path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

/// Parses `text`; `path` only picks the format and labels diagnostics.
pub fn parse(text: &str, path: &Path) -> Outcome<ExperimentConfig> {
    let name = path.display();
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(text)
            .map_err(|e| Failure::Config(format!("{name}:{}:{}: {e}", e.line(), e.column())))
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            Failure::Config(format!("{name}:{line}:{col}: {}", e.message()))
        })
    }
}

/// One-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl ExperimentConfig {
    pub fn build_topology(&self) -> Outcome<Topology> {
        let spec = &self.topology;
        let (root, rest) = spec
            .nodes
            .split_first()
            .ok_or_else(|| Failure::Config("topology needs at least one node".into()))?;
        if let Some(p) = &root.parent {
            return Err(Failure::Config(format!("first node {:?} is the root but names parent {p:?}", root.name)));
        }
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut topo = Topology::with_root(self.node(root)?)?;
        ids.insert(&root.name, 0);
        for n in rest {
            if ids.contains_key(n.name.as_str()) {
                return Err(Failure::Config(format!("node name {:?} is used twice", n.name)));
            }
            let parent = n
                .parent
                .as_deref()
                .ok_or_else(|| Failure::Config(format!("node {:?} has no parent; only the first node may", n.name)))?;
            let &pid = ids.get(parent).ok_or_else(|| {
                Failure::Config(format!("node {:?}: parent {parent:?} must be listed before it", n.name))
            })?;
            let id = topo.add_child(pid, self.node(n)?, n.link.clone().unwrap_or_default())?;
            ids.insert(&n.name, id);
        }
        Ok(topo)
    }

    fn node(&self, n: &NodeSpec) -> Outcome<Node> {
        let arrival = match (n.rate, &n.pmf) {
            (Some(r), None) => ArrivalModel::poisson(r)?,
            (None, Some(p)) => ArrivalModel::explicit(p.clone())?,
            _ => return Err(Failure::Config(format!("node {:?}: give exactly one of rate and pmf", n.name))),
        };
        Ok(Node::new(n.name.clone(), arrival).with_priority(n.priority.unwrap_or(self.topology.priority)))
    }

    pub fn limits(&self) -> Outcome<Limits> {
        self.limits.validate()?;
        Ok(self.limits)
    }

    pub fn leaf_names(&self, topo: &Topology) -> Vec<String> {
        topo.leaves().iter().map(|&id| topo.node(id).name.clone()).collect()
    }

    pub fn sim_config(&self, topo: &Topology) -> Outcome<SimConfig> {
        let p = &self.probe;
        let mut cfg = SimConfig::new(topo.clone(), p.rate, p.d0, p.horizon, p.seed);
        cfg.warmup = p.warmup;
        for entry in &self.schedule {
            let id = topo
                .nodes()
                .iter()
                .position(|n| n.name == entry.node)
                .ok_or_else(|| Failure::Config(format!("schedule names unknown node {:?}", entry.node)))?;
            if cfg.schedules[id].is_some() {
                return Err(Failure::Config(format!("node {:?} has two schedules", entry.node)));
            }
            cfg = cfg.with_schedule(id, Schedule::new(entry.segments.clone())?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn adaptive_settings(&self) -> Outcome<AdaptiveSettings> {
        let o = &self.estimator.adaptive;
        let d = AdaptiveSettings::default();
        let s = AdaptiveSettings {
            a: self.probe.a,
            block: self.probe.block,
            alpha0: o.alpha0.unwrap_or(d.alpha0),
            alpha_min: o.alpha_min.unwrap_or(d.alpha_min),
            alpha_max: o.alpha_max.unwrap_or(d.alpha_max),
            decrease: o.decrease.unwrap_or(d.decrease),
            increase: o.increase.unwrap_or(d.increase),
            grad_threshold: o.grad_threshold.unwrap_or(d.grad_threshold),
            h: o.h.unwrap_or(d.h),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn grid(&self, k: usize) -> Outcome<GridSpec> {
        let g = self.estimator.grid.clone().unwrap_or_else(|| GridSpec::default_for(k));
        g.validate(k)?;
        Ok(g)
    }
}
