//! Round-based traffic: demand distributions and the round scheduler.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::id::{sample_unique_ids, Key};
use crate::network::Topology;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandSpec {
    #[default]
    Uniform,
    Hotspot {
        #[serde(default = "default_hot_fraction")]
        hot_fraction: f64,
        #[serde(default = "default_hot_mass")]
        hot_mass: f64,
    },
}

fn default_hot_fraction() -> f64 {
    0.2
}

fn default_hot_mass() -> f64 {
    0.8
}

impl DemandSpec {
    pub fn build(&self, targets: Vec<Key>, seed: u64) -> Result<DemandModel> {
        match *self {
            DemandSpec::Uniform => DemandModel::uniform(targets),
            DemandSpec::Hotspot {
                hot_fraction,
                hot_mass,
            } => DemandModel::hotspot(targets, hot_fraction, hot_mass, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tier {
    Hot,
    Cold,
}

/// Per-node demand over a shared target set. A node never targets its own
/// key; the mass it would have had is spread over the rest of its tier.
#[derive(Debug, Clone)]
pub struct DemandModel {
    targets: Vec<Key>,
    hot: Vec<usize>,
    cold: Vec<usize>,
    hot_mass: f64,
    /// target index -> (tier, position within tier)
    slot: Vec<(Tier, usize)>,
    index: HashMap<Key, usize>,
}

impl DemandModel {
    pub fn uniform(targets: Vec<Key>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Workload("target set is empty".into()));
        }
        let cold: Vec<usize> = (0..targets.len()).collect();
        Ok(Self::assemble(targets, Vec::new(), cold, 0.0))
    }

    /// A global hot set of `round(hot_fraction * |targets|)` keys drawn with
    /// `seed` receives `hot_mass` of every node's demand.
    pub fn hotspot(targets: Vec<Key>, hot_fraction: f64, hot_mass: f64, seed: u64) -> Result<Self> {
        if !(hot_fraction > 0.0 && hot_fraction < 1.0) {
            return Err(Error::Workload(format!(
                "hot_fraction {hot_fraction} not in (0, 1)"
            )));
        }
        if !(hot_mass > 0.0 && hot_mass < 1.0) {
            return Err(Error::Workload(format!(
                "hot_mass {hot_mass} not in (0, 1)"
            )));
        }
        let n = targets.len();
        let h = (hot_fraction * n as f64).round() as usize;
        if h == 0 || h >= n {
            return Err(Error::Workload(format!(
                "hot set of {h} keys out of {n} is degenerate"
            )));
        }
        let mut rng = seed::rng(seed, seed::HOTSET);
        let mut hot = rand::seq::index::sample(&mut rng, n, h).into_vec();
        hot.sort_unstable();
        let mut is_hot = vec![false; n];
        for &i in &hot {
            is_hot[i] = true;
        }
        let cold = (0..n).filter(|&i| !is_hot[i]).collect();
        Ok(Self::assemble(targets, hot, cold, hot_mass))
    }

    fn assemble(targets: Vec<Key>, hot: Vec<usize>, cold: Vec<usize>, hot_mass: f64) -> Self {
        let mut slot = vec![(Tier::Cold, 0); targets.len()];
        for (pos, &i) in hot.iter().enumerate() {
            slot[i] = (Tier::Hot, pos);
        }
        for (pos, &i) in cold.iter().enumerate() {
            slot[i] = (Tier::Cold, pos);
        }
        let index = targets.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        DemandModel {
            targets,
            hot,
            cold,
            hot_mass,
            slot,
            index,
        }
    }

    pub fn targets(&self) -> &[Key] {
        &self.targets
    }

    pub fn hot_set(&self) -> impl Iterator<Item = Key> + '_ {
        self.hot.iter().map(|&i| self.targets[i])
    }

    pub fn is_hot(&self, key: Key) -> bool {
        self.index
            .get(&key)
            .is_some_and(|&i| self.slot[i].0 == Tier::Hot)
    }

    fn own(&self, source: Key) -> Option<(Tier, usize)> {
        self.index.get(&source).map(|&i| self.slot[i])
    }

    fn tier_size(&self, tier: Tier, own: Option<(Tier, usize)>) -> usize {
        let len = match tier {
            Tier::Hot => self.hot.len(),
            Tier::Cold => self.cold.len(),
        };
        len - usize::from(own.is_some_and(|o| o.0 == tier))
    }

    /// Effective mass of each tier for `source` after self-exclusion.
    fn masses(&self, own: Option<(Tier, usize)>) -> (f64, f64) {
        let hot_n = self.tier_size(Tier::Hot, own);
        let cold_n = self.tier_size(Tier::Cold, own);
        match (hot_n, cold_n) {
            (0, _) => (0.0, 1.0),
            (_, 0) => (1.0, 0.0),
            _ => (self.hot_mass, 1.0 - self.hot_mass),
        }
    }

    /// p_source(target).
    pub fn probability(&self, source: Key, target: Key) -> f64 {
        if source == target {
            return 0.0;
        }
        let Some(&i) = self.index.get(&target) else {
            return 0.0;
        };
        let own = self.own(source);
        let (hot, cold) = self.masses(own);
        let tier = self.slot[i].0;
        let mass = if tier == Tier::Hot { hot } else { cold };
        mass / self.tier_size(tier, own) as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, source: Key, rng: &mut R) -> Result<Key> {
        let own = self.own(source);
        let (hot_mass, cold_mass) = self.masses(own);
        if self.tier_size(Tier::Cold, own) + self.tier_size(Tier::Hot, own) == 0 {
            return Err(Error::Workload(format!(
                "node {source} has no valid target"
            )));
        }
        let tier = if hot_mass > 0.0 && (cold_mass == 0.0 || rng.random::<f64>() < hot_mass) {
            Tier::Hot
        } else {
            Tier::Cold
        };
        let members = match tier {
            Tier::Hot => &self.hot,
            Tier::Cold => &self.cold,
        };
        let mut pos = rng.random_range(0..self.tier_size(tier, own));
        if let Some((t, p)) = own {
            if t == tier && pos >= p {
                pos += 1;
            }
        }
        Ok(self.targets[members[pos]])
    }
}

/// `count` distinct keys drawn uniformly over the ID space.
pub fn dht_keys(width: u8, count: usize, seed: u64) -> Result<Vec<Key>> {
    let mut rng = seed::rng(seed, seed::DHT_KEYS);
    sample_unique_ids(width, count, &mut rng)
}

/// Seeded round scheduler. Sources and targets come from separate streams,
/// so the source sequence does not depend on the demand model.
#[derive(Debug, Clone)]
pub struct Workload {
    demand: DemandModel,
    sources: ChaCha8Rng,
    targets: ChaCha8Rng,
    round: u64,
    replay: Option<Replay>,
}

#[derive(Debug, Clone)]
struct Replay {
    window: u64,
    start_last: u64,
    recorded: Vec<(usize, Key)>,
}

impl Workload {
    pub fn new(demand: DemandModel, seed: u64) -> Self {
        Workload {
            demand,
            sources: seed::rng(seed, seed::DEMAND),
            targets: seed::rng(seed, seed::TARGETS),
            round: 0,
            replay: None,
        }
    }

    /// Makes rounds `rounds - window ..` repeat rounds `0 .. window`.
    pub fn with_replay(mut self, window: u64, rounds: u64) -> Result<Self> {
        if window == 0 || rounds < 2 * window {
            return Err(Error::Workload(format!(
                "window {window} needs at least {} rounds, got {rounds}",
                2 * window.max(1)
            )));
        }
        self.replay = Some(Replay {
            window,
            start_last: rounds - window,
            recorded: Vec::with_capacity(window as usize),
        });
        Ok(self)
    }

    pub fn demand(&self) -> &DemandModel {
        &self.demand
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn next_round(&mut self, topo: &Topology) -> Result<(usize, Key)> {
        if topo.len() < 2 {
            return Err(Error::Workload(
                "a single-node network has no valid target".into(),
            ));
        }
        let round = self.round;
        self.round += 1;
        if let Some(r) = &self.replay {
            if round >= r.start_last {
                return Ok(r.recorded[(round - r.start_last) as usize]);
            }
        }
        let source = self.sources.random_range(0..topo.len());
        let target = self
            .demand
            .sample(topo.nodes[source].id, &mut self.targets)?;
        if let Some(r) = &mut self.replay {
            if round < r.window {
                r.recorded.push((source, target));
            }
        }
        Ok((source, target))
    }
}
