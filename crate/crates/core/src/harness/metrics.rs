//! Per-query and per-epoch records and the summary computed from them.

use serde::{Deserialize, Serialize};

use crate::id::NodeId;
use crate::routing::{App, EpochRecord, ExplorationEvent, LookupResult};

/// Number of trailing epochs averaged as the converged value.
pub const CONVERGED_EPOCHS: usize = 10;

/// One row of `per_query.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub round: u64,
    pub source_id: u64,
    pub target_key: u64,
    pub strategy: String,
    pub app: App,
    pub latency: f64,
    pub hops: usize,
    pub success: bool,
    /// Nodes of the reported path, initiator first.
    #[serde(skip)]
    pub path: Vec<usize>,
}

impl QueryRecord {
    pub fn from_lookup(round: u64, strategy: &str, r: &LookupResult) -> Self {
        let path = r
            .paths
            .iter()
            .find(|p| p.terminal() == r.terminal)
            .map(|p| p.nodes().collect())
            .unwrap_or_else(|| vec![r.source]);
        QueryRecord {
            round,
            source_id: r.initiator.value(),
            target_key: r.target.value(),
            strategy: strategy.to_string(),
            app: r.app,
            latency: r.latency,
            hops: r.hops,
            success: r.success,
            path,
        }
    }
}

/// One row of `per_epoch.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub node_id: u64,
    pub bucket: usize,
    pub epoch: u64,
    pub mean_latency: f64,
    pub action: String,
    pub bucket_score: f64,
    pub delta: f64,
}

impl From<&EpochRecord> for EpochRow {
    fn from(e: &EpochRecord) -> Self {
        EpochRow {
            node_id: e.node_id.value(),
            bucket: e.bucket,
            epoch: e.epoch,
            mean_latency: e.mean_latency,
            action: e.action.as_str().to_string(),
            bucket_score: e.bucket_score,
            delta: e.delta,
        }
    }
}

/// Everything one strategy produced in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    pub strategy: String,
    pub rounds: u64,
    /// Latency of every lookup, in round order.
    pub latencies: Vec<f64>,
    pub successes: u64,
    /// Filled only when queries are recorded.
    pub queries: Vec<QueryRecord>,
    pub epochs: Vec<EpochRecord>,
    pub explorations: Vec<ExplorationEvent>,
    /// Probe lookup over the final tables for the path dump.
    pub sample_path: Option<LookupResult>,
}

impl StrategyRun {
    /// Epoch means of `node`'s `bucket`, in epoch order.
    pub fn epoch_curve(&self, node: usize, bucket: usize) -> Vec<f64> {
        let mut rows: Vec<&EpochRecord> = self
            .epochs
            .iter()
            .filter(|e| e.node == node && e.bucket == bucket)
            .collect();
        rows.sort_by_key(|e| e.epoch);
        rows.iter().map(|e| e.mean_latency).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsStore {
    pub scenario: String,
    pub seed: u64,
    pub app: App,
    pub observed: Vec<usize>,
    pub observed_ids: Vec<NodeId>,
    pub runs: Vec<StrategyRun>,
}

impl MetricsStore {
    pub fn run(&self, strategy: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }

    pub fn summary(&self) -> Summary {
        let mut strategies: Vec<StrategySummary> = self
            .runs
            .iter()
            .map(|run| {
                let mut s =
                    StrategySummary::from_latencies(&run.strategy, &run.latencies, run.successes);
                s.observed = self
                    .observed
                    .iter()
                    .zip(&self.observed_ids)
                    .map(|(&node, &id)| {
                        ObservedSummary::from_curve(id.value(), &run.epoch_curve(node, 1))
                    })
                    .collect();
                s
            })
            .collect();
        fill_improvements(&mut strategies);
        Summary {
            scenario: self.scenario.clone(),
            seed: self.seed,
            strategies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub strategies: Vec<StrategySummary>,
}

impl Summary {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub queries: u64,
    pub successes: u64,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub p99: Option<f64>,
    /// `1 - mean / mean(vanilla)`.
    pub improvement_vs_vanilla: Option<f64>,
    /// `1 - mean / mean(pns)`.
    pub improvement_vs_pns: Option<f64>,
    /// First-bucket epoch curves of the observed nodes.
    #[serde(default)]
    pub observed: Vec<ObservedSummary>,
}

impl StrategySummary {
    pub fn from_latencies(strategy: &str, latencies: &[f64], successes: u64) -> Self {
        let mut sorted = latencies.to_vec();
        sorted.sort_by(f64::total_cmp);
        StrategySummary {
            strategy: strategy.to_string(),
            queries: latencies.len() as u64,
            successes,
            mean: mean(latencies),
            p50: percentile(&sorted, 50.0),
            p90: percentile(&sorted, 90.0),
            p99: percentile(&sorted, 99.0),
            improvement_vs_vanilla: None,
            improvement_vs_pns: None,
            observed: Vec::new(),
        }
    }
}

/// Fills the improvement ratios of every entry from the `vanilla` and
/// `pns` entries, when present.
pub fn fill_improvements(strategies: &mut [StrategySummary]) {
    let find = |name: &str, list: &[StrategySummary]| {
        list.iter()
            .find(|s| s.strategy == name)
            .and_then(|s| s.mean)
    };
    let vanilla = find("vanilla", strategies);
    let pns = find("pns", strategies);
    for s in strategies.iter_mut() {
        let ratio = |base: Option<f64>| match (s.mean, base) {
            (Some(m), Some(b)) if b > 0.0 => Some(1.0 - m / b),
            _ => None,
        };
        s.improvement_vs_vanilla = ratio(vanilla);
        s.improvement_vs_pns = ratio(pns);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSummary {
    pub node_id: u64,
    pub bucket: usize,
    pub epochs: usize,
    pub first_epoch: Option<f64>,
    /// Mean of the last `CONVERGED_EPOCHS` epoch means.
    pub converged: Option<f64>,
}

impl ObservedSummary {
    pub fn from_curve(node_id: u64, curve: &[f64]) -> Self {
        ObservedSummary {
            node_id,
            bucket: 1,
            epochs: curve.len(),
            first_epoch: curve.first().copied(),
            converged: converged(curve),
        }
    }
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Mean of the last `CONVERGED_EPOCHS` entries (all, if fewer).
pub fn converged(curve: &[f64]) -> Option<f64> {
    mean(&curve[curve.len().saturating_sub(CONVERGED_EPOCHS)..])
}

/// Nearest-rank percentile of ascending `sorted`.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}
