//! K-buckets, table strategies and the lookup engine.

pub mod engine;
pub mod event;
pub mod storage;
pub mod strategies;
pub mod strategy;
pub mod table;

pub use engine::{
    App, EpochRecord, ExplorationEvent, HopStamp, LookupResult, PathTrace, RoutingMode, SimParams,
    Simulation,
};
pub use event::EventQueue;
pub use storage::{store_replicated, Storage};
pub use strategy::{StrategyFactory, StrategyOptions, StrategyRegistry, TableStrategy};
pub use table::{
    next_hop_pr, next_hop_xor, populate_pns, populate_vanilla, KBucket, PeerRecord, RoutingTable,
};
