//! Discrete-event simulation of Kademlia lookups under interchangeable
//! routing-table strategies.
//!
//! The crate is organised bottom-up:
//!
//! * [`id`] identifiers, the XOR metric and bucket arithmetic;
//! * [`network`] topologies, link latencies and per-node upload latency;
//! * [`routing`] k-buckets, the strategy registry and the lookup engine;
//! * [`learner`] the per-bucket bandit learner used by the `kadabra` strategy;
//! * [`workload`] demand models and the round scheduler;
//! * [`harness`] scenario configuration, metrics and file output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod id;
pub mod learner;
pub mod network;
pub mod routing;
pub mod workload;

pub use error::{Error, Result};
pub use id::{Key, NodeId, XorDistance};

pub(crate) mod seed {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent generator for one purpose within a seeded run.
    pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    pub const IDS: u64 = 1;
    pub const PLACEMENT: u64 = 2;
    pub const DELTAS: u64 = 3;
    pub const LINK_NOISE: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const ADVERSARIES: u64 = 6;
    pub const DELTA_NOISE: u64 = 7;
    pub const TABLES: u64 = 8;
    pub const EXPLORATION: u64 = 9;
    pub const DEMAND: u64 = 10;
    pub const HOTSET: u64 = 11;
    pub const DHT_KEYS: u64 = 12;
    pub const OBSERVE: u64 = 13;
    pub const TARGETS: u64 = 14;
    pub const PATH_PAIR: u64 = 15;
}
