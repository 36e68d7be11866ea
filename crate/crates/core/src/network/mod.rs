//! Network model: node placement, link latency `l(u, v)` and upload latency.

pub mod dataset;
pub mod perturb;
pub mod topology;

pub use dataset::{City, CityDataset};
pub use perturb::{
    apply_adversaries, apply_delta_noise, apply_region_override, DeltaNoise, DeltaOverride,
    Placement, Region,
};
pub use topology::{
    gen_real_world, gen_square, Bootstrap, Location, SimNode, SquareParams, Topology, TopologyMode,
    DEFAULT_KNOWN_PEERS, SAME_CITY_LATENCY_MS,
};
