//! The built-in table strategies.

use rand_chacha::ChaCha8Rng;

use crate::id::Key;
use crate::learner::LearnerParams;
use crate::network::Topology;
use crate::routing::strategy::TableStrategy;
use crate::routing::table::{
    next_hop_pr, next_hop_xor, populate_pns, populate_vanilla, PeerRecord, RoutingTable,
};

/// Random bucket contents, XOR-closest forwarding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Vanilla;

/// Random bucket contents, lowest-RTT forwarding within the target bucket.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProximityRouting;

/// Lowest-RTT bucket contents, XOR-closest forwarding.
#[derive(Debug, Clone, Copy, Default)]
pub struct Pns;

/// Random initial buckets refined by per-bucket learners; XOR-closest
/// forwarding.
#[derive(Debug, Clone)]
pub struct Kadabra {
    params: LearnerParams,
}

impl Kadabra {
    pub fn new(params: LearnerParams) -> Self {
        Kadabra { params }
    }
}

impl TableStrategy for Vanilla {
    fn name(&self) -> &str {
        "vanilla"
    }

    fn populate(
        &self,
        topo: &Topology,
        owner: usize,
        known: &[usize],
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> RoutingTable {
        populate_vanilla(topo, owner, known, k, rng)
    }

    fn next_hop<'t>(&self, table: &'t RoutingTable, target: Key) -> Option<&'t PeerRecord> {
        next_hop_xor(table, target)
    }
}

impl TableStrategy for ProximityRouting {
    fn name(&self) -> &str {
        "pr"
    }

    fn populate(
        &self,
        topo: &Topology,
        owner: usize,
        known: &[usize],
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> RoutingTable {
        populate_vanilla(topo, owner, known, k, rng)
    }

    fn next_hop<'t>(&self, table: &'t RoutingTable, target: Key) -> Option<&'t PeerRecord> {
        next_hop_pr(table, target)
    }
}

impl TableStrategy for Pns {
    fn name(&self) -> &str {
        "pns"
    }

    fn populate(
        &self,
        topo: &Topology,
        owner: usize,
        known: &[usize],
        k: usize,
        _rng: &mut ChaCha8Rng,
    ) -> RoutingTable {
        populate_pns(topo, owner, known, k)
    }

    fn next_hop<'t>(&self, table: &'t RoutingTable, target: Key) -> Option<&'t PeerRecord> {
        next_hop_xor(table, target)
    }
}

impl TableStrategy for Kadabra {
    fn name(&self) -> &str {
        "kadabra"
    }

    fn populate(
        &self,
        topo: &Topology,
        owner: usize,
        known: &[usize],
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> RoutingTable {
        populate_vanilla(topo, owner, known, k, rng)
    }

    fn next_hop<'t>(&self, table: &'t RoutingTable, target: Key) -> Option<&'t PeerRecord> {
        next_hop_xor(table, target)
    }

    fn learner(&self) -> Option<&LearnerParams> {
        Some(&self.params)
    }
}
