//! Named desk-scale scenarios: 512 nodes, runs end once the observed
//! node's 1st bucket has seen 50 epochs.

use crate::error::{Error, Result};
use crate::harness::config::{
    AdversaryConfig, AdversaryPlacement, ObserveConfig, OverrideConfig, ScenarioConfig,
    TopologyConfig,
};
use crate::learner::LearnerParams;
use crate::network::{DeltaOverride, Region};
use crate::routing::{App, RoutingMode};
use crate::workload::DemandSpec;

pub const DESK_NODES: usize = 512;
pub const DESK_EPOCHS: u64 = 50;
/// Round cap for epoch-bounded runs.
pub const DESK_MAX_ROUNDS: u64 = 20_000_000;

/// ρ per bucket for the city topology, in milliseconds.
pub const REAL_WORLD_RHO: [f64; 9] = [40.0, 35.0, 30.0, 25.0, 20.0, 15.0, 10.0, 5.0, 0.0];

pub const NAMES: [(&str, &str); 13] = [
    ("square-uniform", "square, KBR, uniform demand"),
    (
        "square-hotspot",
        "square, KBR, 20% of keys draw 80% of lookups",
    ),
    (
        "square-high-delta",
        "square, KBR, 2000x2000 centre with upload latency 5000; observer inside",
    ),
    (
        "square-dht",
        "square, DHT with 2 paths and 3 replicas, uniform demand",
    ),
    (
        "square-noise",
        "square-uniform with +-5% upload-latency noise",
    ),
    (
        "real-uniform",
        "city topology, KBR, uniform demand, observer in Frankfurt",
    ),
    ("real-hotspot", "city topology, KBR, hotspot demand"),
    (
        "real-high-delta",
        "city topology, 4% of nodes near New York at 5x mean upload latency",
    ),
    ("real-dht", "city topology, DHT, uniform demand"),
    (
        "real-adversary-random",
        "city topology, 20% adversaries at 3x delay, random placement",
    ),
    (
        "real-adversary-concentrated",
        "city topology, 20% adversaries at 3x delay nearest the victim",
    ),
    ("real-iterative", "city topology, KBR, iterative routing"),
    ("real-noise", "real-uniform with +-5% upload-latency noise"),
];

fn square(nodes: usize) -> TopologyConfig {
    TopologyConfig::Square {
        nodes,
        id_bits: 16,
        known_peers: 256,
        side: 10_000.0,
        link_latency: [100.0, 5_000.0],
        delta: [100.0, 2_000.0],
        overrides: Vec::new(),
    }
}

fn real_world(nodes: usize) -> TopologyConfig {
    TopologyConfig::RealWorld {
        nodes,
        id_bits: 16,
        known_peers: 256,
        delta_mean: 1_000.0,
        dataset: None,
        overrides: Vec::new(),
    }
}

fn base(name: &str, topology: TopologyConfig) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        seed: 1,
        rounds: DESK_MAX_ROUNDS,
        until_epochs: Some(DESK_EPOCHS),
        strategies: ["vanilla", "pr", "pns", "kadabra"]
            .map(String::from)
            .to_vec(),
        app: App::Kbr,
        routing: RoutingMode::Recursive,
        k: 16,
        alpha: None,
        replicas: 3,
        dht_keys: None,
        noise: 0.0,
        record_queries: false,
        topology,
        demand: DemandSpec::Uniform,
        adversary: None,
        learner: LearnerParams::default(),
        observe: ObserveConfig::default(),
    }
}

fn real_base(name: &str) -> ScenarioConfig {
    let mut c = base(name, real_world(DESK_NODES));
    c.learner.rho = REAL_WORLD_RHO.to_vec();
    c.observe.region = Some(Region::Cities {
        names: vec!["Frankfurt".into()],
    });
    c
}

fn hotspot() -> DemandSpec {
    DemandSpec::Hotspot {
        hot_fraction: 0.2,
        hot_mass: 0.8,
    }
}

pub fn scenario(name: &str) -> Result<ScenarioConfig> {
    let mut c = match name {
        "square-uniform" | "square-hotspot" | "square-dht" | "square-noise" => {
            base(name, square(DESK_NODES))
        }
        "square-high-delta" => {
            let centre = Region::CenterSquare { size: 2_000.0 };
            let mut topo = square(DESK_NODES);
            if let TopologyConfig::Square { overrides, .. } = &mut topo {
                overrides.push(OverrideConfig {
                    region: centre.clone(),
                    delta: DeltaOverride::Set(5_000.0),
                });
            }
            let mut c = base(name, topo);
            c.observe.region = Some(centre);
            c
        }
        "real-high-delta" => {
            let region = Region::NearCity {
                city: "New York".into(),
                fraction: 0.04,
            };
            let mut c = real_base(name);
            if let TopologyConfig::RealWorld { overrides, .. } = &mut c.topology {
                overrides.push(OverrideConfig {
                    region: region.clone(),
                    delta: DeltaOverride::MeanMultiple(5.0),
                });
            }
            c.observe.region = Some(region);
            c
        }
        n if n.starts_with("real-") && NAMES.iter().any(|(k, _)| *k == n) => real_base(name),
        _ => {
            return Err(Error::config(format!(
                "unknown scenario {name:?}; known: {}",
                NAMES.map(|(n, _)| n).join(", ")
            )))
        }
    };
    match name {
        "square-hotspot" | "real-hotspot" => c.demand = hotspot(),
        "square-dht" | "real-dht" => c.app = App::Dht,
        "square-noise" | "real-noise" => c.noise = 0.05,
        "real-iterative" => c.routing = RoutingMode::Iterative,
        "real-adversary-random" | "real-adversary-concentrated" => {
            c.adversary = Some(AdversaryConfig {
                fraction: 0.2,
                multiplier: 3.0,
                placement: if name.ends_with("concentrated") {
                    AdversaryPlacement::Concentrated
                } else {
                    AdversaryPlacement::Random
                },
            });
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_scenario_builds_and_round_trips() {
        for (name, _) in NAMES {
            let c = scenario(name).unwrap();
            assert_eq!(c.name, name);
            assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
        assert!(scenario("moon-base").is_err());
    }

    #[test]
    fn variants_differ_where_expected() {
        assert_eq!(scenario("square-dht").unwrap().alpha(), 2);
        assert_eq!(scenario("real-noise").unwrap().noise, 0.05);
        assert!(scenario("real-adversary-concentrated")
            .unwrap()
            .adversary
            .is_some());
        assert_eq!(scenario("real-uniform").unwrap().learner.rho[0], 40.0);
        assert_eq!(scenario("square-uniform").unwrap().learner.rho[0], 400.0);
    }
}
