//! Routing-table strategies and the name-keyed registry that builds them.
//!
//! A strategy decides how a node fills its buckets at start-up and which
//! peer it forwards a query to. Strategies that learn expose
//! [`LearnerParams`]; the engine then attaches a bucket learner to every
//! bucket that routes traffic.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::id::Key;
use crate::learner::LearnerParams;
use crate::network::Topology;
use crate::routing::strategies::{Kadabra, Pns, ProximityRouting, Vanilla};
use crate::routing::table::{PeerRecord, RoutingTable};

pub trait TableStrategy: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Builds the initial table of `owner` from the peers it knows.
    fn populate(
        &self,
        topo: &Topology,
        owner: usize,
        known: &[usize],
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> RoutingTable;

    /// Candidate next hop; the engine forwards only if it is strictly closer
    /// to the target than the current node.
    fn next_hop<'t>(&self, table: &'t RoutingTable, target: Key) -> Option<&'t PeerRecord>;

    fn learner(&self) -> Option<&LearnerParams> {
        None
    }
}

/// Options handed to every factory; strategies read what they need.
#[derive(Debug, Clone, Default)]
pub struct StrategyOptions {
    pub learner: LearnerParams,
}

pub type StrategyFactory = Box<dyn Fn(&StrategyOptions) -> Box<dyn TableStrategy> + Send + Sync>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, StrategyFactory>,
}

impl fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StrategyRegistry")
            .field("names", &self.names())
            .finish()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `vanilla`, `pr`, `pns` and `kadabra`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("vanilla", |_| Box::new(Vanilla));
        r.register("pr", |_| Box::new(ProximityRouting));
        r.register("pns", |_| Box::new(Pns));
        r.register("kadabra", |o| Box::new(Kadabra::new(o.learner.clone())));
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategyOptions) -> Box<dyn TableStrategy> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, opts: &StrategyOptions) -> Result<Box<dyn TableStrategy>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::config(format!(
                "unknown strategy {name:?}; known: {}",
                self.names().join(", ")
            ))
        })?;
        Ok(factory(opts))
    }
}
