#![allow(dead_code)]

pub mod props;

use std::sync::Arc;

use kadsim::id::NodeId;
use kadsim::learner::LearnerParams;
use kadsim::network::{gen_square, Bootstrap, Location, SimNode, SquareParams, Topology};
use kadsim::routing::{
    store_replicated, App, RoutingMode, SimParams, Simulation, StrategyOptions, StrategyRegistry,
};

pub const STRATEGIES: [&str; 4] = ["vanilla", "pr", "pns", "kadabra"];

/// Square topology; `full` makes every node know every other node.
pub fn square(n: usize, seed: u64, full: bool) -> Arc<Topology> {
    let params = SquareParams {
        nodes: n,
        ..SquareParams::default()
    };
    let boot = Bootstrap {
        id_bits: 16,
        known_peers: if full { n - 1 } else { 256 },
    };
    Arc::new(gen_square(&params, boot, seed).unwrap())
}

pub fn node(id: u64, bits: u8, delta: f64, known: Vec<usize>) -> SimNode {
    SimNode {
        id: NodeId::new(id, bits).unwrap(),
        location: Location::Point { x: 0.0, y: 0.0 },
        delta,
        adversarial: false,
        known_peers: known,
    }
}

pub fn learner(b: usize) -> LearnerParams {
    LearnerParams {
        b,
        ..LearnerParams::default()
    }
}

pub fn sim(
    topo: &Arc<Topology>,
    strategy: &str,
    mut params: SimParams,
    learner: LearnerParams,
) -> Simulation {
    params.observer = learner.clone();
    let s = StrategyRegistry::builtin()
        .build(strategy, &StrategyOptions { learner })
        .unwrap();
    let storage = (params.app == App::Dht).then(|| {
        let keys: Vec<NodeId> = topo.nodes.iter().map(|n| n.id).collect();
        store_replicated(topo, &keys, 3).unwrap()
    });
    Simulation::new(topo.clone(), s, params, storage).unwrap()
}

pub fn kbr(routing: RoutingMode, seed: u64) -> SimParams {
    SimParams {
        routing,
        seed,
        ..SimParams::default()
    }
}

/// Globally XOR-closest node to `key`.
pub fn closest_node(topo: &Topology, key: NodeId) -> usize {
    (0..topo.len())
        .min_by_key(|&i| topo.nodes[i].id.distance(key))
        .unwrap()
}
