//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors. Every key is optional and falls back to the default below.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `loss` | `logistic` | `least_squares`, `logistic` or `nonconvex_robust` |
//! | `agents` | `8` | number of agents `n` |
//! | `dim` | `20` | variable dimension `p` |
//! | `samples_per_agent` | `150` | local dataset size (synthetic data) |
//! | `data_seed` | `0` | synthetic data seed |
//! | `non_iid` | `false` | label-sorted partition across agents |
//! | `l1` | `0.01` | l1 weight `λ`; `0` disables the regularizer |
//! | `alpha` | `0.1` | weight of the smooth nonconvex penalty |
//! | `feature_scale` | `1.0` | feature standard deviation |
//! | `noise` | `0.1` | label noise scale |
//! | `sparsity` | `5` | nonzeros of the planted truth |
//! | `dataset` | none | manifest JSON; replaces synthetic data |
//! | `topology` | `ring` | `ring`, `star`, `path`, `hub_leaf`, `random_connected`, `edge_list` |
//! | `hubs` | `2` | hub count for `hub_leaf` |
//! | `edge_prob` | `0.3` | edge probability for `random_connected` |
//! | `edge_list` | none | edge-list file for `edge_list` |
//! | `topology_seed` | `0` | seed for `random_connected` |
//! | `algorithm` | `hsm_admm` | `hsm_admm`, `uniform_admm`, `prox_dsgd`, `prox_gt` |
//! | `c_rho`, `c_a`, `c_eta` | `1`, `1`, `2` | schedule constants |
//! | `batch` | `1` | per-round batch size `B`, or `full` |
//! | `m0` | `32` | initial momentum batch |
//! | `rounds` | `1000` | iteration budget `K` |
//! | `seed` | `0` | master seed |
//! | `workers` | `1` | worker threads |
//! | `divergence_guard` | `1e12` | abort when any state entry exceeds this |
//! | `cadence` | `auto` | `auto` or a fixed row interval |
//! | `base_step` | `0.1` | baseline step `γ₀` |
//! | `init_scale` | `1.0` | standard deviation of `x⁰` |
//! | `theta`, `c_gamma`, `c_mu`, `c_err` | `1`, `1`, `1`, `24` | Lyapunov constants |
//! | `diagnostics` | `false` | per-round diagnostics and dual-bound checks |
//! | `replicas` | `1` | independent runs with seeds `seed, seed+1, …` |
//! | `output` | `out` | output directory |
//! | `plots` | `true` | write SVG plots |

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::estimator::Sampling;
use crate::graph::{build_topology, Graph, GraphError, Topology};
use crate::problems::{load_dataset, synthetic, CompositeProblem, LossKind, ProblemError, Regularizer, SyntheticSpec};
use crate::simulator::{Cadence, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("key `{key}`: invalid value {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TopologyKind {
    Ring,
    Star,
    Path,
    HubLeaf,
    RandomConnected,
    EdgeList,
}

impl TopologyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "ring" => TopologyKind::Ring,
            "star" => TopologyKind::Star,
            "path" => TopologyKind::Path,
            "hub_leaf" => TopologyKind::HubLeaf,
            "random_connected" => TopologyKind::RandomConnected,
            "edge_list" => TopologyKind::EdgeList,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            TopologyKind::Ring => "ring",
            TopologyKind::Star => "star",
            TopologyKind::Path => "path",
            TopologyKind::HubLeaf => "hub_leaf",
            TopologyKind::RandomConnected => "random_connected",
            TopologyKind::EdgeList => "edge_list",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub loss: LossKind,
    pub agents: usize,
    pub dim: usize,
    pub samples_per_agent: usize,
    pub data_seed: u64,
    pub non_iid: bool,
    pub l1: f64,
    pub alpha: f64,
    pub feature_scale: f64,
    pub noise: f64,
    pub sparsity: usize,
    pub dataset: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub hubs: usize,
    pub edge_prob: f64,
    pub edge_list: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub topology: TopologyConfig,
    pub sim: SimConfig,
    pub replicas: usize,
    pub output: PathBuf,
    pub plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: ProblemConfig {
                loss: LossKind::Logistic,
                agents: 8,
                dim: 20,
                samples_per_agent: 150,
                data_seed: 0,
                non_iid: false,
                l1: 0.01,
                alpha: 0.1,
                feature_scale: 1.0,
                noise: 0.1,
                sparsity: 5,
                dataset: None,
            },
            topology: TopologyConfig { kind: TopologyKind::Ring, hubs: 2, edge_prob: 0.3, edge_list: None, seed: 0 },
            sim: SimConfig::default(),
            replicas: 1,
            output: PathBuf::from("out"),
            plots: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_loss(key: &str, value: &str) -> Result<LossKind, ConfigError> {
    [LossKind::LeastSquares, LossKind::Logistic, LossKind::NonconvexRobust]
        .into_iter()
        .find(|l| l.name() == value)
        .ok_or_else(|| ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            reason: "expected least_squares, logistic or nonconvex_robust".into(),
        })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate { line: idx + 1, key: key.into() });
            }
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: idx + 1, key },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let p = &mut self.problem;
        let t = &mut self.topology;
        let s = &mut self.sim;
        match key {
            "loss" => p.loss = parse_loss(key, value)?,
            "agents" => p.agents = parse_value(key, value)?,
            "dim" => p.dim = parse_value(key, value)?,
            "samples_per_agent" => p.samples_per_agent = parse_value(key, value)?,
            "data_seed" => p.data_seed = parse_value(key, value)?,
            "non_iid" => p.non_iid = parse_value(key, value)?,
            "l1" => p.l1 = parse_value(key, value)?,
            "alpha" => p.alpha = parse_value(key, value)?,
            "feature_scale" => p.feature_scale = parse_value(key, value)?,
            "noise" => p.noise = parse_value(key, value)?,
            "sparsity" => p.sparsity = parse_value(key, value)?,
            "dataset" => p.dataset = Some(PathBuf::from(value)),
            "topology" => {
                t.kind = TopologyKind::parse(value).ok_or_else(|| ConfigError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "unknown topology".into(),
                })?
            }
            "hubs" => t.hubs = parse_value(key, value)?,
            "edge_prob" => t.edge_prob = parse_value(key, value)?,
            "edge_list" => t.edge_list = Some(PathBuf::from(value)),
            "topology_seed" => t.seed = parse_value(key, value)?,
            "algorithm" => {
                s.algorithm = value.parse().map_err(|reason| ConfigError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason,
                })?
            }
            "c_rho" => s.schedules.c_rho = parse_value(key, value)?,
            "c_a" => s.schedules.c_a = parse_value(key, value)?,
            "c_eta" => s.schedules.c_eta = parse_value(key, value)?,
            "batch" => {
                s.sampling = if value == "full" {
                    Sampling::FullBatch
                } else {
                    Sampling::WithReplacement { batch: parse_value(key, value)? }
                }
            }
            "m0" => s.m0 = parse_value(key, value)?,
            "rounds" => s.rounds = parse_value(key, value)?,
            "seed" => s.seed = parse_value(key, value)?,
            "workers" => s.workers = parse_value(key, value)?,
            "divergence_guard" => s.divergence_guard = parse_value(key, value)?,
            "cadence" => {
                s.cadence = if value == "auto" { Cadence::Auto } else { Cadence::Every(parse_value(key, value)?) }
            }
            "base_step" => s.base_step = parse_value(key, value)?,
            "init_scale" => s.init_scale = parse_value(key, value)?,
            "theta" => s.lyapunov.theta = parse_value(key, value)?,
            "c_gamma" => s.lyapunov.c_gamma = parse_value(key, value)?,
            "c_mu" => s.lyapunov.c_mu = parse_value(key, value)?,
            "c_err" => s.lyapunov.c_err = parse_value(key, value)?,
            "diagnostics" => s.diagnostics = parse_value(key, value)?,
            "replicas" => self.replicas = parse_value(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "plots" => self.plots = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey { line: 0, key: key.into() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.problem;
        if p.dataset.is_none() && (p.agents < 1 || p.dim < 1 || p.samples_per_agent < 1) {
            return Err(ConfigError::Invalid("agents, dim and samples_per_agent must be positive".into()));
        }
        if !(p.l1 >= 0.0 && p.alpha >= 0.0) {
            return Err(ConfigError::Invalid("l1 and alpha must be >= 0".into()));
        }
        if self.replicas == 0 {
            return Err(ConfigError::Invalid("replicas must be at least 1".into()));
        }
        if self.topology.kind == TopologyKind::EdgeList && self.topology.edge_list.is_none() {
            return Err(ConfigError::Invalid("topology = edge_list needs an edge_list path".into()));
        }
        self.sim.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn regularizer(&self) -> Regularizer {
        if self.problem.l1 > 0.0 {
            Regularizer::L1 { weight: self.problem.l1 }
        } else {
            Regularizer::None
        }
    }

    pub fn build_problem(&self) -> Result<CompositeProblem, ConfigError> {
        let p = &self.problem;
        let prob = match &p.dataset {
            Some(path) => CompositeProblem::new(p.loss, self.regularizer(), p.alpha, load_dataset(path)?)?,
            None => synthetic(&SyntheticSpec {
                agents: p.agents,
                dim: p.dim,
                samples_per_agent: p.samples_per_agent,
                loss: p.loss,
                regularizer: self.regularizer(),
                alpha: p.alpha,
                feature_scale: p.feature_scale,
                noise: p.noise,
                sparsity: p.sparsity,
                non_iid: p.non_iid,
                seed: p.data_seed,
            })?,
        };
        Ok(prob)
    }

    pub fn build_graph(&self, n: usize) -> Result<Graph, ConfigError> {
        let t = &self.topology;
        let kind = match t.kind {
            TopologyKind::Ring => Topology::Ring,
            TopologyKind::Star => Topology::Star,
            TopologyKind::Path => Topology::Path,
            TopologyKind::HubLeaf => Topology::HubLeaf { hubs: t.hubs },
            TopologyKind::RandomConnected => Topology::RandomConnected { prob: t.edge_prob },
            TopologyKind::EdgeList => {
                let path = t.edge_list.as_ref().expect("validated");
                let text = std::fs::read_to_string(path).map_err(GraphError::from)?;
                return Ok(Graph::parse_edge_list(&text, Some(n))?);
            }
        };
        Ok(build_topology(&kind, n, t.seed)?)
    }

    /// Render back to the text format; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let p = &self.problem;
        let t = &self.topology;
        let s = &self.sim;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("loss", p.loss.name().into());
        kv("agents", p.agents.to_string());
        kv("dim", p.dim.to_string());
        kv("samples_per_agent", p.samples_per_agent.to_string());
        kv("data_seed", p.data_seed.to_string());
        kv("non_iid", p.non_iid.to_string());
        kv("l1", p.l1.to_string());
        kv("alpha", p.alpha.to_string());
        kv("feature_scale", p.feature_scale.to_string());
        kv("noise", p.noise.to_string());
        kv("sparsity", p.sparsity.to_string());
        if let Some(d) = &p.dataset {
            kv("dataset", d.display().to_string());
        }
        kv("topology", t.kind.name().into());
        kv("hubs", t.hubs.to_string());
        kv("edge_prob", t.edge_prob.to_string());
        if let Some(e) = &t.edge_list {
            kv("edge_list", e.display().to_string());
        }
        kv("topology_seed", t.seed.to_string());
        kv("algorithm", s.algorithm.name().into());
        kv("c_rho", s.schedules.c_rho.to_string());
        kv("c_a", s.schedules.c_a.to_string());
        kv("c_eta", s.schedules.c_eta.to_string());
        kv(
            "batch",
            match s.sampling {
                Sampling::FullBatch => "full".into(),
                Sampling::WithReplacement { batch } => batch.to_string(),
            },
        );
        kv("m0", s.m0.to_string());
        kv("rounds", s.rounds.to_string());
        kv("seed", s.seed.to_string());
        kv("workers", s.workers.to_string());
        kv("divergence_guard", s.divergence_guard.to_string());
        kv(
            "cadence",
            match s.cadence {
                Cadence::Auto => "auto".into(),
                Cadence::Every(n) => n.to_string(),
            },
        );
        kv("base_step", s.base_step.to_string());
        kv("init_scale", s.init_scale.to_string());
        kv("theta", s.lyapunov.theta.to_string());
        kv("c_gamma", s.lyapunov.c_gamma.to_string());
        kv("c_mu", s.lyapunov.c_mu.to_string());
        kv("c_err", s.lyapunov.c_err.to_string());
        kv("diagnostics", s.diagnostics.to_string());
        kv("replicas", self.replicas.to_string());
        kv("output", self.output.display().to_string());
        kv("plots", self.plots.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let cfg = RunConfig::parse(
            "# ring quadratic\nloss = least_squares\nagents=4\n dim = 5 # inline\nbatch = full\ncadence = 10\nl1 = 0\n",
        )
        .unwrap();
        assert_eq!(cfg.problem.loss, LossKind::LeastSquares);
        assert_eq!(cfg.problem.agents, 4);
        assert_eq!(cfg.problem.dim, 5);
        assert_eq!(cfg.sim.sampling, Sampling::FullBatch);
        assert_eq!(cfg.sim.cadence, Cadence::Every(10));
        assert_eq!(cfg.regularizer(), Regularizer::None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_bad_values() {
        assert!(matches!(RunConfig::parse("speed = 3\n"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse("dim = 3\ndim = 4\n"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(RunConfig::parse("dim = three\n"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(RunConfig::parse("just words\n"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(RunConfig::parse("c_eta = -1\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse("algorithm = sgd\n"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn text_roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.set("topology", "hub_leaf").unwrap();
        cfg.set("c_eta", "3.5").unwrap();
        cfg.set("batch", "4").unwrap();
        cfg.set("non_iid", "true").unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn builds_problem_and_graph() {
        let cfg = RunConfig::parse("agents = 6\ndim = 3\nsamples_per_agent = 5\ntopology = star\n").unwrap();
        let prob = cfg.build_problem().unwrap();
        let g = cfg.build_graph(prob.agents()).unwrap();
        assert_eq!(g.max_degree(), 5);
    }
}
