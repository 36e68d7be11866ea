//! Discrete-event lookup engine.
//!
//! A [`Simulation`] owns every node's routing table and learner state and
//! runs one lookup at a time through a time-ordered event queue. Cost model:
//! a query crossing a link pays the link latency; every response a node
//! sends first pays that node's upload latency. Adversarial nodes inflate
//! their upload latency by the topology's multiplier and also hold queries
//! back by the same excess before forwarding them.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::id::{bucket_index_unchecked, Key, NodeId};
use crate::learner::{Action, BucketLearner, LearnerParams, QueryTrace};
use crate::network::{apply_delta_noise, DeltaNoise, Topology};
use crate::routing::event::EventQueue;
use crate::routing::storage::Storage;
use crate::routing::strategy::TableStrategy;
use crate::routing::table::{eligible_by_bucket, PeerRecord, RoutingTable};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum App {
    Kbr,
    Dht,
}

impl App {
    pub fn as_str(self) -> &'static str {
        match self {
            App::Kbr => "kbr",
            App::Dht => "dht",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    Recursive,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub k: usize,
    pub alpha: usize,
    pub app: App,
    pub routing: RoutingMode,
    /// Relative amplitude of per-use upload-latency noise.
    pub noise: f64,
    /// Nodes whose bucket epochs are logged.
    pub observed: Vec<usize>,
    pub seed: u64,
    /// Epoch settings for observed nodes when the strategy does not learn.
    pub observer: LearnerParams,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            k: 16,
            alpha: 1,
            app: App::Kbr,
            routing: RoutingMode::Recursive,
            noise: 0.0,
            observed: Vec::new(),
            seed: 0,
            observer: LearnerParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopStamp {
    pub node: usize,
    /// When the query reached this node (0 for the initiator).
    pub query_at: f64,
    /// When this node received the response; NaN if it never did.
    pub response_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathTrace {
    /// Initiator first, then every node the query reached.
    pub hops: Vec<HopStamp>,
    pub completed_at: f64,
    pub success: bool,
}

impl PathTrace {
    pub fn hop_count(&self) -> usize {
        self.hops.len() - 1
    }

    pub fn terminal(&self) -> usize {
        self.hops
            .last()
            .expect("a path has at least its initiator")
            .node
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.hops.iter().map(|h| h.node)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LookupResult {
    pub query: u64,
    pub source: usize,
    pub initiator: NodeId,
    pub target: Key,
    pub app: App,
    /// Time from initiation until the first successful response; for a
    /// failed lookup, until the last failure response.
    pub latency: f64,
    pub paths: Vec<PathTrace>,
    pub success: bool,
    pub hops: usize,
    /// Node that answered the reported path (the initiator if it answered itself).
    pub terminal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub node: usize,
    pub node_id: NodeId,
    pub bucket: usize,
    pub epoch: u64,
    pub mean_latency: f64,
    pub action: Action,
    pub bucket_score: f64,
    pub delta: f64,
    pub queries: usize,
}

/// A peer introduced into a bucket by exploration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplorationEvent {
    pub node: usize,
    pub bucket: usize,
    pub peer: usize,
    pub rtt: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Query { path: usize, pos: usize },
    Response { path: usize, pos: usize },
    Contact { path: usize, pos: usize },
    Reply { path: usize, pos: usize },
}

#[derive(Debug)]
struct PathState {
    hops: Vec<HopStamp>,
    completed_at: f64,
    success: bool,
    /// Iterative mode: the answer the last contacted node gave.
    verdict: Option<Verdict>,
}

#[derive(Debug, Clone, Copy)]
enum Verdict {
    Answer { success: bool },
    Next(usize),
}

#[derive(Debug, Clone, Copy)]
struct Observation {
    node: usize,
    peer: usize,
    delay: f64,
}

pub struct Simulation {
    topo: Arc<Topology>,
    strategy: Box<dyn TableStrategy>,
    params: SimParams,
    learner_params: LearnerParams,
    learning: bool,
    initial_delta: f64,
    tables: Vec<RoutingTable>,
    learners: Vec<Vec<Option<BucketLearner>>>,
    observed: Vec<bool>,
    known: Vec<Vec<usize>>,
    known_flag: Vec<bool>,
    storage: Option<Storage>,
    noise: DeltaNoise,
    explore_rng: ChaCha8Rng,
    queue: EventQueue<Event>,
    next_query: u64,
    epochs: Vec<EpochRecord>,
    explorations: Vec<ExplorationEvent>,
    observations: Vec<Observation>,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("strategy", &self.strategy.name())
            .field("nodes", &self.topo.len())
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Simulation {
    pub fn new(
        topo: Arc<Topology>,
        strategy: Box<dyn TableStrategy>,
        params: SimParams,
        storage: Option<Storage>,
    ) -> Result<Self> {
        let n = topo.len();
        if params.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if params.alpha == 0 {
            return Err(Error::config("alpha must be at least 1"));
        }
        if params.app == App::Kbr && params.alpha != 1 {
            return Err(Error::config(
                "key-based routing sends a single query (alpha = 1)",
            ));
        }
        if params.app == App::Dht && storage.is_none() {
            return Err(Error::config("the DHT application needs stored keys"));
        }
        if let Some(bad) = params.observed.iter().find(|&&v| v >= n) {
            return Err(Error::config(format!("observed node {bad} out of range")));
        }
        let noise = apply_delta_noise(&topo, params.noise, params.seed)?;

        let learner_params = strategy
            .learner()
            .cloned()
            .unwrap_or_else(|| params.observer.clone());
        learner_params.validate()?;
        let learning = strategy.learner().is_some();
        let initial_delta = learner_params
            .initial_delta
            .unwrap_or(2.0 * topo.diameter_estimate());

        let mut table_rng = seed::rng(params.seed, seed::TABLES);
        let known: Vec<Vec<usize>> = topo.nodes.iter().map(|n| n.known_peers.clone()).collect();
        let tables = (0..n)
            .map(|v| strategy.populate(&topo, v, &known[v], params.k, &mut table_rng))
            .collect();
        let mut known_flag = vec![false; n * n];
        for (v, peers) in known.iter().enumerate() {
            for &u in peers {
                known_flag[v * n + u] = true;
            }
        }
        let mut observed = vec![false; n];
        for &v in &params.observed {
            observed[v] = true;
        }
        let width = topo.nodes[0].id.width() as usize;
        Ok(Simulation {
            learners: vec![vec![None; width]; n],
            explore_rng: seed::rng(params.seed, seed::EXPLORATION),
            topo,
            strategy,
            learner_params,
            learning,
            initial_delta,
            tables,
            observed,
            known,
            known_flag,
            storage,
            noise,
            queue: EventQueue::new(),
            next_query: 0,
            epochs: Vec::new(),
            explorations: Vec::new(),
            observations: Vec::new(),
            params,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn strategy(&self) -> &dyn TableStrategy {
        self.strategy.as_ref()
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn table(&self, node: usize) -> &RoutingTable {
        &self.tables[node]
    }

    pub fn tables(&self) -> &[RoutingTable] {
        &self.tables
    }

    pub fn storage(&self) -> Option<&Storage> {
        self.storage.as_ref()
    }

    pub fn known_peers(&self, node: usize) -> &[usize] {
        &self.known[node]
    }

    pub fn learner(&self, node: usize, bucket: usize) -> Option<&BucketLearner> {
        self.learners[node][bucket - 1].as_ref()
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    pub fn take_epochs(&mut self) -> Vec<EpochRecord> {
        std::mem::take(&mut self.epochs)
    }

    pub fn explorations(&self) -> &[ExplorationEvent] {
        &self.explorations
    }

    /// Number of completed epochs of `bucket` at `node`.
    pub fn epochs_completed(&self, node: usize, bucket: usize) -> u64 {
        self.learner(node, bucket).map_or(0, BucketLearner::epoch)
    }

    pub fn check_tables(&self) -> Result<()> {
        self.tables
            .iter()
            .try_for_each(RoutingTable::check_invariants)
    }

    /// Runs one lookup and feeds its measurements to the learners.
    pub fn lookup(&mut self, source: usize, target: Key) -> Result<LookupResult> {
        self.run(source, target, true)
    }

    /// Runs one lookup without recording measurements or learning peers.
    pub fn probe(&mut self, source: usize, target: Key) -> Result<LookupResult> {
        self.run(source, target, false)
    }

    fn run(&mut self, source: usize, target: Key, learn: bool) -> Result<LookupResult> {
        if source >= self.topo.len() {
            return Err(Error::config(format!("source {source} out of range")));
        }
        if target.width() != self.topo.nodes[source].id.width() {
            return Err(Error::WidthMismatch {
                left: self.topo.nodes[source].id.width(),
                right: target.width(),
            });
        }
        let query = self.next_query;
        self.next_query += 1;
        self.observations.clear();
        self.queue.reset();

        let base = LookupResult {
            query,
            source,
            initiator: self.topo.nodes[source].id,
            target,
            app: self.params.app,
            latency: 0.0,
            paths: Vec::new(),
            success: true,
            hops: 0,
            terminal: source,
        };
        if self.params.app == App::Dht && self.stores(source, target) {
            return Ok(base);
        }
        let firsts = self.first_hops(source, target);
        if firsts.is_empty() {
            return Ok(LookupResult {
                success: self.params.app == App::Kbr,
                ..base
            });
        }

        let mut paths: Vec<PathState> = Vec::with_capacity(firsts.len());
        let iterative = self.params.routing == RoutingMode::Iterative;
        for (p, &first) in firsts.iter().enumerate() {
            paths.push(PathState {
                hops: vec![
                    HopStamp {
                        node: source,
                        query_at: 0.0,
                        response_at: f64::NAN,
                    },
                    HopStamp {
                        node: first,
                        query_at: f64::NAN,
                        response_at: f64::NAN,
                    },
                ],
                completed_at: f64::NAN,
                success: false,
                verdict: None,
            });
            let at = self.topo.latency(source, first);
            let ev = if iterative {
                Event::Contact { path: p, pos: 1 }
            } else {
                Event::Query { path: p, pos: 1 }
            };
            self.queue.push(at, ev);
            if learn {
                self.meet(source, first);
            }
        }

        while let Some((t, ev)) = self.queue.pop() {
            match ev {
                Event::Query { path, pos } => {
                    let w = paths[path].hops[pos].node;
                    paths[path].hops[pos].query_at = t;
                    let prev = paths[path].hops[pos - 1].node;
                    match self.verdict(w, target) {
                        Verdict::Answer { success } => {
                            paths[path].success = success;
                            let at = t + self.upload(w) + self.topo.latency(w, prev);
                            self.queue.push(at, Event::Response { path, pos: pos - 1 });
                        }
                        Verdict::Next(next) => {
                            paths[path].hops.push(HopStamp {
                                node: next,
                                query_at: f64::NAN,
                                response_at: f64::NAN,
                            });
                            let at = t + self.hold(w) + self.topo.latency(w, next);
                            self.queue.push(at, Event::Query { path, pos: pos + 1 });
                            if learn {
                                self.meet(w, next);
                            }
                        }
                    }
                }
                Event::Response { path, pos } => {
                    let hop = &mut paths[path].hops[pos];
                    hop.response_at = t;
                    let (u, sent) = (hop.node, hop.query_at);
                    if learn {
                        let peer = paths[path].hops[pos + 1].node;
                        self.observations.push(Observation {
                            node: u,
                            peer,
                            delay: t - sent,
                        });
                    }
                    if pos == 0 {
                        paths[path].completed_at = t;
                    } else {
                        let prev = paths[path].hops[pos - 1].node;
                        let at = t + self.upload(u) + self.topo.latency(u, prev);
                        self.queue.push(at, Event::Response { path, pos: pos - 1 });
                    }
                }
                Event::Contact { path, pos } => {
                    let w = paths[path].hops[pos].node;
                    paths[path].hops[pos].query_at = t;
                    let verdict = self.verdict(w, target);
                    paths[path].verdict = Some(verdict);
                    let at = t + self.hold(w) + self.upload(w) + self.topo.latency(w, source);
                    self.queue.push(at, Event::Reply { path, pos });
                }
                Event::Reply { path, pos } => {
                    paths[path].hops[pos].response_at = t;
                    match paths[path].verdict.take().expect("reply follows a contact") {
                        Verdict::Answer { success } => {
                            paths[path].success = success;
                            paths[path].completed_at = t;
                            paths[path].hops[0].response_at = t;
                            if learn {
                                let first = paths[path].hops[1].node;
                                self.observations.push(Observation {
                                    node: source,
                                    peer: first,
                                    delay: t,
                                });
                            }
                        }
                        Verdict::Next(next) => {
                            paths[path].hops.push(HopStamp {
                                node: next,
                                query_at: f64::NAN,
                                response_at: f64::NAN,
                            });
                            let at = t + self.topo.latency(source, next);
                            self.queue.push(at, Event::Contact { path, pos: pos + 1 });
                            if learn {
                                self.meet(source, next);
                            }
                        }
                    }
                }
            }
        }

        let best = paths
            .iter()
            .enumerate()
            .filter(|(_, p)| p.success)
            .min_by(|a, b| {
                a.1.completed_at
                    .total_cmp(&b.1.completed_at)
                    .then(a.0.cmp(&b.0))
            })
            .map(|(i, _)| i);
        let (latency, report) = match best {
            Some(i) => (paths[i].completed_at, i),
            None => (paths.iter().map(|p| p.completed_at).fold(0.0, f64::max), 0),
        };
        let paths: Vec<PathTrace> = paths
            .into_iter()
            .map(|p| PathTrace {
                hops: p.hops,
                completed_at: p.completed_at,
                success: p.success,
            })
            .collect();
        let result = LookupResult {
            latency,
            success: best.is_some(),
            hops: paths[report].hop_count(),
            terminal: paths[report].terminal(),
            paths,
            ..base
        };
        if learn {
            self.apply_observations(query)?;
        }
        Ok(result)
    }

    fn stores(&self, node: usize, key: Key) -> bool {
        self.storage.as_ref().is_some_and(|s| s.stores(node, key))
    }

    fn verdict(&self, w: usize, target: Key) -> Verdict {
        if self.params.app == App::Dht && self.stores(w, target) {
            return Verdict::Answer { success: true };
        }
        let own = self.topo.nodes[w].id.distance(target);
        match self.strategy.next_hop(&self.tables[w], target) {
            Some(p) if p.id.distance(target) < own => Verdict::Next(p.node),
            _ => Verdict::Answer {
                success: self.params.app == App::Kbr,
            },
        }
    }

    /// The strategy's own choice first, then further strictly-closer peers
    /// in XOR order until `alpha` distinct peers are chosen.
    fn first_hops(&self, source: usize, target: Key) -> Vec<usize> {
        let table = &self.tables[source];
        let own = self.topo.nodes[source].id.distance(target);
        let mut out = Vec::with_capacity(self.params.alpha);
        if let Some(p) = self.strategy.next_hop(table, target) {
            if p.id.distance(target) < own {
                out.push(p.node);
            }
        }
        if self.params.alpha > out.len() {
            let mut closer: Vec<&PeerRecord> = table
                .peers()
                .filter(|p| p.id.distance(target) < own && !out.contains(&p.node))
                .collect();
            closer.sort_by_key(|p| (p.id.distance(target), p.id.value()));
            let room = self.params.alpha - out.len();
            out.extend(closer.into_iter().take(room).map(|p| p.node));
        }
        out
    }

    fn upload(&mut self, w: usize) -> f64 {
        let d = self.noise.sample(self.topo.nodes[w].delta);
        self.topo.upload_cost(w, d)
    }

    fn hold(&mut self, w: usize) -> f64 {
        if !self.topo.nodes[w].adversarial {
            return 0.0;
        }
        let d = self.noise.sample(self.topo.nodes[w].delta);
        self.topo.forward_extra(w, d)
    }

    fn meet(&mut self, a: usize, b: usize) {
        let n = self.topo.len();
        for (x, y) in [(a, b), (b, a)] {
            if !self.known_flag[x * n + y] {
                self.known_flag[x * n + y] = true;
                self.known[x].push(y);
            }
        }
    }

    fn has_learner_slot(&self, node: usize) -> bool {
        self.learning || self.observed[node]
    }

    fn apply_observations(&mut self, query: u64) -> Result<()> {
        if self.observations.is_empty() {
            return Ok(());
        }
        // one trace per (node, bucket), in order of first appearance
        let mut groups: Vec<(usize, usize, QueryTrace)> = Vec::new();
        for obs in std::mem::take(&mut self.observations) {
            if !self.has_learner_slot(obs.node) {
                continue;
            }
            let owner = self.topo.nodes[obs.node].id;
            let peer_id = self.topo.nodes[obs.peer].id;
            let bucket = bucket_index_unchecked(owner, peer_id);
            match groups.iter_mut().find(|g| g.0 == obs.node && g.1 == bucket) {
                Some(g) => g.2.peers.push((peer_id, obs.delay)),
                None => groups.push((
                    obs.node,
                    bucket,
                    QueryTrace {
                        query,
                        peers: vec![(peer_id, obs.delay)],
                    },
                )),
            }
        }
        for (node, bucket, trace) in groups {
            self.record(node, bucket, trace)?;
        }
        Ok(())
    }

    fn record(&mut self, node: usize, bucket: usize, trace: QueryTrace) -> Result<()> {
        let active = self.learning;
        let slot = &mut self.learners[node][bucket - 1];
        let learner = slot.get_or_insert_with(|| {
            BucketLearner::new(bucket, &self.learner_params, self.initial_delta, active)
        });
        let current = self.tables[node].bucket(bucket).peers();
        let complete = learner.record_query(current, trace)?;
        if !complete {
            return Ok(());
        }
        let candidates = if active {
            eligible_by_bucket(&self.topo, node, &self.known[node]).swap_remove(bucket)
        } else {
            Vec::new()
        };
        let learner = self.learners[node][bucket - 1]
            .as_mut()
            .expect("inserted above");
        let current = self.tables[node].bucket(bucket).peers().to_vec();
        let decision =
            learner.epoch_update(&current, &candidates, self.params.k, &mut self.explore_rng);
        for added in &decision.added {
            self.explorations.push(ExplorationEvent {
                node,
                bucket,
                peer: added.node,
                rtt: added.rtt,
                rho: learner.rho(),
            });
        }
        if self.observed[node] {
            self.epochs.push(EpochRecord {
                node,
                node_id: self.topo.nodes[node].id,
                bucket,
                epoch: decision.epoch,
                mean_latency: decision.mean_latency,
                action: decision.action,
                bucket_score: decision.bucket_score,
                delta: decision.delta,
                queries: self.learner_params.b,
            });
        }
        if decision.next != current {
            self.tables[node].replace_bucket(bucket, decision.next)?;
        }
        Ok(())
    }
}
