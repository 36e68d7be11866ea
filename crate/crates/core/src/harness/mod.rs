//! Scenario configuration, runs, metrics and output files.

pub mod catalog;
pub mod config;
pub mod emit;
pub mod metrics;
pub mod plot;
pub mod runner;

pub use catalog::scenario;
pub use config::{
    AdversaryConfig, AdversaryPlacement, ObserveConfig, OverrideConfig, ScenarioConfig,
    TopologyConfig,
};
pub use metrics::{MetricsStore, QueryRecord, StrategyRun, StrategySummary, Summary};
pub use runner::{
    before_after_histogram, compare, prepare, run_prepared, run_scenario, run_strategy, simulate,
    CompareReport, Prepared, WindowHistogram,
};
