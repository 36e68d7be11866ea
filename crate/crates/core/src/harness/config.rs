//! Scenario configuration (TOML).
//!
//! ```toml
//! name = "square-uniform"
//! seed = 1
//! rounds = 200000
//! strategies = ["vanilla", "pr", "pns", "kadabra"]
//! app = "kbr"
//!
//! [topology]
//! kind = "square"
//! nodes = 512
//!
//! [demand]
//! kind = "hotspot"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::id::{DEFAULT_WIDTH, MAX_WIDTH};
use crate::learner::LearnerParams;
use crate::network::{DeltaOverride, Region, DEFAULT_KNOWN_PEERS};
use crate::routing::{App, RoutingMode, StrategyRegistry};
use crate::workload::DemandSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Maximum number of rounds per strategy.
    pub rounds: u64,
    /// Stop a strategy early once every observed node's 1st bucket has
    /// completed this many epochs.
    #[serde(default)]
    pub until_epochs: Option<u64>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_app")]
    pub app: App,
    #[serde(default = "default_routing")]
    pub routing: RoutingMode,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Parallel paths; defaults to 1 for KBR and 2 for DHT.
    #[serde(default)]
    pub alpha: Option<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Stored key count for DHT runs; defaults to the node count.
    #[serde(default)]
    pub dht_keys: Option<usize>,
    /// Relative amplitude of per-use upload-latency noise.
    #[serde(default)]
    pub noise: f64,
    /// Keep every lookup in memory and write `per_query.csv`.
    #[serde(default = "default_true")]
    pub record_queries: bool,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub demand: DemandSpec,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(default)]
    pub learner: LearnerParams,
    #[serde(default)]
    pub observe: ObserveConfig,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_strategies() -> Vec<String> {
    ["vanilla", "pr", "pns", "kadabra"]
        .map(String::from)
        .to_vec()
}

fn default_app() -> App {
    App::Kbr
}

fn default_routing() -> RoutingMode {
    RoutingMode::Recursive
}

fn default_k() -> usize {
    16
}

fn default_replicas() -> usize {
    3
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Square {
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "default_id_bits")]
        id_bits: u8,
        #[serde(default = "default_known")]
        known_peers: usize,
        #[serde(default = "default_side")]
        side: f64,
        #[serde(default = "default_link")]
        link_latency: [f64; 2],
        #[serde(default = "default_square_delta")]
        delta: [f64; 2],
        #[serde(default)]
        overrides: Vec<OverrideConfig>,
    },
    RealWorld {
        #[serde(default = "default_nodes")]
        nodes: usize,
        #[serde(default = "default_id_bits")]
        id_bits: u8,
        #[serde(default = "default_known")]
        known_peers: usize,
        #[serde(default = "default_delta_mean")]
        delta_mean: f64,
        /// Directory with `cities.csv`, `pings.csv` and `node_cities.csv`;
        /// the bundled fixture when absent.
        #[serde(default)]
        dataset: Option<PathBuf>,
        #[serde(default)]
        overrides: Vec<OverrideConfig>,
    },
}

fn default_nodes() -> usize {
    512
}

fn default_id_bits() -> u8 {
    DEFAULT_WIDTH
}

fn default_known() -> usize {
    DEFAULT_KNOWN_PEERS
}

fn default_side() -> f64 {
    10_000.0
}

fn default_link() -> [f64; 2] {
    [100.0, 5_000.0]
}

fn default_square_delta() -> [f64; 2] {
    [100.0, 2_000.0]
}

fn default_delta_mean() -> f64 {
    1_000.0
}

impl TopologyConfig {
    pub fn nodes(&self) -> usize {
        match self {
            TopologyConfig::Square { nodes, .. } | TopologyConfig::RealWorld { nodes, .. } => {
                *nodes
            }
        }
    }

    pub fn id_bits(&self) -> u8 {
        match self {
            TopologyConfig::Square { id_bits, .. } | TopologyConfig::RealWorld { id_bits, .. } => {
                *id_bits
            }
        }
    }

    pub fn overrides(&self) -> &[OverrideConfig] {
        match self {
            TopologyConfig::Square { overrides, .. }
            | TopologyConfig::RealWorld { overrides, .. } => overrides,
        }
    }
}

/// Upload-latency change for the nodes in a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideConfig {
    pub region: Region,
    pub delta: DeltaOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryPlacement {
    Random,
    /// Nearest to the first observed node.
    Concentrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub fraction: f64,
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
    #[serde(default = "default_placement")]
    pub placement: AdversaryPlacement,
}

fn default_multiplier() -> f64 {
    3.0
}

fn default_placement() -> AdversaryPlacement {
    AdversaryPlacement::Random
}

/// Which nodes get per-epoch logging. Explicit `nodes` win; otherwise
/// `count` nodes are drawn with the run seed, from `region` if given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserveConfig {
    pub nodes: Vec<usize>,
    pub count: usize,
    pub region: Option<Region>,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        ObserveConfig {
            nodes: Vec::new(),
            count: 1,
            region: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn alpha(&self) -> usize {
        self.alpha.unwrap_or(match self.app {
            App::Kbr => 1,
            App::Dht => 2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.nodes();
        if n < 2 {
            return Err(Error::config("at least two nodes are required"));
        }
        let bits = self.topology.id_bits();
        if bits == 0 || bits > MAX_WIDTH {
            return Err(Error::config(format!("id_bits must be in 1..={MAX_WIDTH}")));
        }
        if (n as u128) > (1u128 << bits) {
            return Err(Error::config(format!(
                "{n} nodes do not fit in {bits}-bit IDs"
            )));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("no strategies selected"));
        }
        let registry = StrategyRegistry::builtin();
        for s in &self.strategies {
            if !registry.contains(s) {
                return Err(Error::config(format!(
                    "unknown strategy {s:?}; known: {}",
                    registry.names().join(", ")
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        match (self.app, self.alpha()) {
            (_, 0) => return Err(Error::config("alpha must be at least 1")),
            (App::Kbr, a) if a != 1 => {
                return Err(Error::config("key-based routing requires alpha = 1"))
            }
            _ => {}
        }
        if self.app == App::Dht {
            if self.replicas == 0 || self.replicas > n {
                return Err(Error::config(format!("replicas must be in 1..={n}")));
            }
            if self.dht_keys == Some(0) {
                return Err(Error::config("dht_keys must be at least 1"));
            }
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::config("noise must be in [0, 1)"));
        }
        if let Some(a) = &self.adversary {
            if !(0.0..=1.0).contains(&a.fraction) {
                return Err(Error::config("adversary fraction must be in [0, 1]"));
            }
            if !(a.multiplier >= 1.0) {
                return Err(Error::config("adversary multiplier must be at least 1"));
            }
        }
        match &self.topology {
            TopologyConfig::Square {
                side,
                link_latency,
                delta,
                ..
            } => {
                if !(*side > 0.0) {
                    return Err(Error::config("side must be positive"));
                }
                for (what, [lo, hi]) in [("link_latency", link_latency), ("delta", delta)] {
                    if !(*lo >= 0.0 && lo <= hi) {
                        return Err(Error::config(format!(
                            "{what} must be a range [lo, hi] with 0 <= lo <= hi"
                        )));
                    }
                }
            }
            TopologyConfig::RealWorld { delta_mean, .. } => {
                if !(*delta_mean > 0.0) {
                    return Err(Error::config("delta_mean must be positive"));
                }
            }
        }
        if let Some(&bad) = self.observe.nodes.iter().find(|&&v| v >= n) {
            return Err(Error::config(format!("observed node {bad} out of range")));
        }
        if self.observe.nodes.is_empty() && self.observe.count > n {
            return Err(Error::config("observe.count exceeds the node count"));
        }
        self.learner.validate()
    }
}
