//! Per-bucket bandit learner.
//!
//! Each k-bucket of a learning node is an independent bandit instance. The
//! instance collects a ledger of the queries it routed during an epoch of
//! `b` queries, scores every peer by the delays it produced (queries a peer
//! did not carry cost the penalty `Δ`), and then alternates between two
//! moves: an exploration epoch swaps the worst-scoring peer for a random
//! eligible peer whose RTT exceeds the security threshold `ρ`; a comparison
//! epoch keeps the current peer set only if it scored better than the set
//! used in the previous epoch, and otherwise reverts to it.
//!
//! Scores are negated delay sums, so higher is better everywhere.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::id::NodeId;
use crate::routing::PeerRecord;

/// Per-bucket ρ for the square scenario, 1st bucket first; later buckets use 0.
pub const SQUARE_RHO: [f64; 9] = [400.0, 350.0, 300.0, 250.0, 200.0, 150.0, 100.0, 50.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerParams {
    /// Queries per epoch.
    pub b: usize,
    /// ρ per bucket index, 1st bucket first; missing entries are 0.
    pub rho: Vec<f64>,
    /// Δ = margin × moving average of bucket latency.
    pub margin: f64,
    /// Weight of the newest epoch in the moving average.
    pub smoothing: f64,
    /// Peers swapped per exploration epoch.
    pub replacements: usize,
    /// Δ before any data; the engine uses twice the network diameter when unset.
    pub initial_delta: Option<f64>,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            b: 100,
            rho: SQUARE_RHO.to_vec(),
            margin: 1.2,
            smoothing: 0.2,
            replacements: 1,
            initial_delta: None,
        }
    }
}

impl LearnerParams {
    pub fn rho_for(&self, bucket: usize) -> f64 {
        self.rho.get(bucket - 1).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::config("epoch length b must be at least 1"));
        }
        if self.rho.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("rho values must be non-negative"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::config("delta margin must be positive"));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(Error::config("delta smoothing must be in (0, 1]"));
        }
        if self.replacements == 0 {
            return Err(Error::config("replacements must be at least 1"));
        }
        Ok(())
    }
}

/// One query routed through the bucket: the peers it went to and the delay
/// until each of them answered.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryTrace {
    pub query: u64,
    pub peers: Vec<(NodeId, f64)>,
}

impl QueryTrace {
    /// Time until the first response arrived.
    pub fn latency(&self) -> f64 {
        self.peers.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }

    fn delay_via(&self, peer: NodeId) -> Option<f64> {
        self.peers.iter().find(|p| p.0 == peer).map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochLedger {
    pub epoch: u64,
    queries: Vec<QueryTrace>,
}

impl EpochLedger {
    pub fn new(epoch: u64) -> Self {
        EpochLedger {
            epoch,
            queries: Vec::new(),
        }
    }

    pub fn from_traces(epoch: u64, queries: Vec<QueryTrace>) -> Self {
        EpochLedger { epoch, queries }
    }

    pub fn queries(&self) -> &[QueryTrace] {
        &self.queries
    }

    pub fn count(&self) -> usize {
        self.queries.len()
    }

    pub fn mean_latency(&self) -> Option<f64> {
        if self.queries.is_empty() {
            return None;
        }
        Some(self.queries.iter().map(QueryTrace::latency).sum::<f64>() / self.queries.len() as f64)
    }
}

/// `-Σ_i d_i(u)`, charging `delta` for every query `u` did not carry.
pub fn score_peer(peer: NodeId, ledger: &EpochLedger, delta: f64) -> f64 {
    -ledger
        .queries
        .iter()
        .map(|q| q.delay_via(peer).unwrap_or(delta))
        .sum::<f64>()
}

/// Mean peer score; an empty bucket scores `-delta`.
pub fn score_bucket(gamma: &[NodeId], ledger: &EpochLedger, delta: f64) -> f64 {
    if gamma.is_empty() {
        return -delta;
    }
    gamma
        .iter()
        .map(|&u| score_peer(u, ledger, delta))
        .sum::<f64>()
        / gamma.len() as f64
}

/// Uniform draw from the candidates with `rtt > rho` that are not excluded.
pub fn select_random_peer<R: Rng + ?Sized>(
    candidates: &[PeerRecord],
    rho: f64,
    exclude: &[NodeId],
    rng: &mut R,
) -> Option<PeerRecord> {
    let eligible: Vec<&PeerRecord> = candidates
        .iter()
        .filter(|p| p.rtt > rho && !exclude.contains(&p.id))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    Some(*eligible[rng.random_range(0..eligible.len())])
}

/// Exponential moving average of per-epoch bucket latency and the penalty
/// derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTracker {
    margin: f64,
    smoothing: f64,
    ema: Option<f64>,
    delta: f64,
}

impl DeltaTracker {
    pub fn new(margin: f64, smoothing: f64, initial: f64) -> Self {
        DeltaTracker {
            margin,
            smoothing,
            ema: None,
            delta: initial,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ema(&self) -> Option<f64> {
        self.ema
    }

    pub fn observe(&mut self, epoch_mean: f64) {
        self.ema = Some(match self.ema {
            None => epoch_mean,
            Some(prev) => prev + self.smoothing * (epoch_mean - prev),
        });
    }

    /// Moves Δ to `margin × EMA` and returns it.
    pub fn refresh(&mut self) -> f64 {
        if let Some(ema) = self.ema {
            self.delta = self.margin * ema;
        }
        self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Explore,
    Keep,
    Revert,
    Noop,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Explore => "explore",
            Action::Keep => "keep",
            Action::Revert => "revert",
            Action::Noop => "noop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochDecision {
    pub epoch: u64,
    pub next: Vec<PeerRecord>,
    pub action: Action,
    /// Score of the peer set that served the finished epoch.
    pub bucket_score: f64,
    /// Δ used to score the finished epoch.
    pub delta: f64,
    pub mean_latency: f64,
    pub removed: Vec<NodeId>,
    pub added: Vec<PeerRecord>,
}

/// Learner state of one k-bucket.
#[derive(Debug, Clone)]
pub struct BucketLearner {
    bucket: usize,
    b: usize,
    rho: f64,
    replacements: usize,
    /// When false the learner only measures and never changes the bucket.
    active: bool,
    explore_next: bool,
    prev: Option<Vec<PeerRecord>>,
    prev_score: f64,
    tracker: DeltaTracker,
    ledger: EpochLedger,
}

impl BucketLearner {
    pub fn new(bucket: usize, params: &LearnerParams, initial_delta: f64, active: bool) -> Self {
        BucketLearner {
            bucket,
            b: params.b,
            rho: params.rho_for(bucket),
            replacements: params.replacements,
            active,
            explore_next: false,
            prev: None,
            prev_score: f64::NEG_INFINITY,
            tracker: DeltaTracker::new(params.margin, params.smoothing, initial_delta),
            ledger: EpochLedger::new(0),
        }
    }

    pub fn bucket(&self) -> usize {
        self.bucket
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.tracker.delta()
    }

    pub fn explore_next(&self) -> bool {
        self.explore_next
    }

    pub fn prev_score(&self) -> f64 {
        self.prev_score
    }

    pub fn previous(&self) -> Option<&[PeerRecord]> {
        self.prev.as_deref()
    }

    pub fn ledger(&self) -> &EpochLedger {
        &self.ledger
    }

    pub fn epoch(&self) -> u64 {
        self.ledger.epoch
    }

    /// Appends a trace; returns true once the epoch holds `b` queries.
    pub fn record_query(&mut self, current: &[PeerRecord], trace: QueryTrace) -> Result<bool> {
        if let Some((unknown, _)) = trace
            .peers
            .iter()
            .find(|(id, _)| !current.iter().any(|p| p.id == *id))
        {
            log::debug!(
                "bucket {}: rejecting trace via unknown peer {unknown}",
                self.bucket
            );
            return Err(Error::Learner(format!(
                "peer {unknown} is not in bucket {}",
                self.bucket
            )));
        }
        if trace.peers.iter().any(|p| !(p.1 >= 0.0)) {
            return Err(Error::Learner("negative response delay".into()));
        }
        self.ledger.queries.push(trace);
        Ok(self.ledger.count() >= self.b)
    }

    /// Closes the epoch: scores the current peer set, decides the next one
    /// and resets the ledger.
    pub fn epoch_update<R: Rng + ?Sized>(
        &mut self,
        current: &[PeerRecord],
        candidates: &[PeerRecord],
        k: usize,
        rng: &mut R,
    ) -> EpochDecision {
        let delta = self.tracker.delta();
        let ids: Vec<NodeId> = current.iter().map(|p| p.id).collect();
        let bucket_score = score_bucket(&ids, &self.ledger, delta);
        let mean_latency = self.ledger.mean_latency().unwrap_or(0.0);
        let comparing = !self.explore_next;

        let mut removed = Vec::new();
        let mut added = Vec::new();
        let (next, action) = if !self.active {
            (current.to_vec(), Action::Noop)
        } else if self.explore_next {
            let mut next = current.to_vec();
            let mut scored: Vec<(f64, NodeId)> = ids
                .iter()
                .map(|&u| (score_peer(u, &self.ledger, delta), u))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.value().cmp(&b.1.value())));
            let mut worst = scored.into_iter().map(|s| s.1);
            for _ in 0..self.replacements {
                let exclude: Vec<NodeId> = next
                    .iter()
                    .map(|p| p.id)
                    .chain(removed.iter().copied())
                    .collect();
                let Some(fresh) = select_random_peer(candidates, self.rho, &exclude, rng) else {
                    break;
                };
                if next.len() >= k {
                    let Some(out) = worst.next() else { break };
                    next.retain(|p| p.id != out);
                    removed.push(out);
                }
                next.push(fresh);
                added.push(fresh);
            }
            let action = if added.is_empty() {
                Action::Noop
            } else {
                Action::Explore
            };
            (next, action)
        } else if bucket_score > self.prev_score {
            (current.to_vec(), Action::Keep)
        } else {
            (
                self.prev.clone().unwrap_or_else(|| current.to_vec()),
                Action::Revert,
            )
        };

        let decision = EpochDecision {
            epoch: self.ledger.epoch,
            next,
            action,
            bucket_score,
            delta,
            mean_latency,
            removed,
            added,
        };

        self.prev = Some(current.to_vec());
        self.prev_score = bucket_score;
        self.explore_next = !self.explore_next;
        if let Some(mean) = self.ledger.mean_latency() {
            self.tracker.observe(mean);
        }
        // Δ only moves after a comparison so that both epochs of the next
        // explore/compare pair are scored against the same penalty.
        if comparing {
            self.tracker.refresh();
        }
        self.ledger = EpochLedger::new(self.ledger.epoch + 1);
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nid(v: u64) -> NodeId {
        NodeId::new(v, 8).unwrap()
    }

    fn rec(v: u64, rtt: f64) -> PeerRecord {
        PeerRecord {
            id: nid(v),
            node: v as usize,
            rtt,
        }
    }

    fn trace(q: u64, peers: &[(u64, f64)]) -> QueryTrace {
        QueryTrace {
            query: q,
            peers: peers.iter().map(|&(p, d)| (nid(p), d)).collect(),
        }
    }

    #[test]
    fn peer_score_examples() {
        let ledger = EpochLedger::from_traces(
            0,
            vec![
                trace(1, &[(1, 200.0)]),
                trace(2, &[(1, 300.0)]),
                trace(3, &[(2, 50.0)]),
            ],
        );
        assert_eq!(score_peer(nid(1), &ledger, 600.0), -1100.0);
        assert_eq!(score_peer(nid(9), &ledger, 600.0), -3.0 * 600.0);
        assert_eq!(score_peer(nid(1), &EpochLedger::new(0), 600.0), 0.0);
    }

    #[test]
    fn bucket_score_examples() {
        assert_eq!(score_bucket(&[], &EpochLedger::new(0), 600.0), -600.0);
        // peer 1 scores -1100 and peer 2 scores -900
        let ledger = EpochLedger::from_traces(
            0,
            vec![trace(1, &[(1, 200.0)]), trace(2, &[(1, 300.0), (2, 300.0)])],
        );
        assert_eq!(score_peer(nid(1), &ledger, 600.0), -500.0);
        let ledger =
            EpochLedger::from_traces(0, vec![trace(1, &[(1, 500.0)]), trace(2, &[(2, 300.0)])]);
        assert_eq!(score_peer(nid(1), &ledger, 600.0), -1100.0);
        assert_eq!(score_peer(nid(2), &ledger, 600.0), -900.0);
        assert_eq!(score_bucket(&[nid(1), nid(2)], &ledger, 600.0), -1000.0);
        assert_eq!(score_bucket(&[nid(1)], &ledger, 600.0), -1100.0);
    }

    #[test]
    fn random_peer_respects_rho_and_exclusions() {
        let l = [rec(1, 100.0), rec(2, 500.0), rec(3, 900.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [0usize; 4];
        for _ in 0..10_000 {
            let p = select_random_peer(&l, 400.0, &[], &mut rng).unwrap();
            seen[p.node] += 1;
        }
        assert_eq!(seen[1], 0);
        assert!((seen[2] as f64 - 5000.0).abs() < 300.0);
        let p = select_random_peer(&l, 0.0, &[nid(1), nid(2)], &mut rng).unwrap();
        assert_eq!(p.node, 3);
        assert!(select_random_peer(&l, 900.0, &[], &mut rng).is_none());
    }

    #[test]
    fn delta_tracker_examples() {
        let mut t = DeltaTracker::new(1.2, 0.2, 38_284.0);
        assert_eq!(t.delta(), 38_284.0);
        t.observe(1000.0);
        assert!((t.refresh() - 1200.0).abs() < 1e-9);
        for _ in 0..200 {
            t.observe(750.0);
        }
        assert!((t.refresh() - 900.0).abs() < 1e-6);
    }

    #[test]
    fn record_query_signals_epoch_end() {
        let params = LearnerParams {
            b: 100,
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &params, 1000.0, true);
        let cur = [rec(1, 10.0)];
        for q in 0..99 {
            assert!(!l.record_query(&cur, trace(q, &[(1, 5.0)])).unwrap());
        }
        assert!(l.record_query(&cur, trace(99, &[(1, 5.0)])).unwrap());
        assert!(l.record_query(&cur, trace(100, &[(7, 5.0)])).is_err());

        let one = LearnerParams {
            b: 1,
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &one, 1000.0, true);
        assert!(l.record_query(&cur, trace(0, &[(1, 5.0)])).unwrap());
    }

    fn run_epoch(
        l: &mut BucketLearner,
        cur: &[PeerRecord],
        traces: Vec<QueryTrace>,
        cands: &[PeerRecord],
    ) -> EpochDecision {
        for t in traces {
            l.record_query(cur, t).unwrap();
        }
        l.epoch_update(cur, cands, 3, &mut ChaCha8Rng::seed_from_u64(4))
    }

    #[test]
    fn explore_replaces_the_worst_peer() {
        let params = LearnerParams {
            b: 3,
            rho: vec![400.0],
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &params, 1000.0, true);
        let cur = vec![rec(1, 500.0), rec(2, 500.0), rec(3, 500.0)];
        let cands = vec![
            rec(1, 500.0),
            rec(2, 500.0),
            rec(3, 500.0),
            rec(4, 100.0),
            rec(5, 800.0),
        ];
        // epoch 0 is a comparison against -inf and keeps the set
        let d0 = run_epoch(&mut l, &cur, vec![trace(0, &[(1, 10.0)])], &cands);
        assert_eq!(d0.action, Action::Keep);
        // Δ is now 1.2 * 10 = 12, so peer scores are -524, -1224 and -824
        let traces = vec![
            trace(1, &[(1, 500.0)]),
            trace(2, &[(2, 1200.0)]),
            trace(3, &[(3, 800.0)]),
        ];
        let d1 = run_epoch(&mut l, &cur, traces, &cands);
        assert_eq!(d1.action, Action::Explore);
        assert_eq!(d1.removed, vec![nid(2)]);
        // only peer 5 clears rho = 400 and is not already present
        assert_eq!(d1.added, vec![rec(5, 800.0)]);
        assert_eq!(d1.next.len(), 3);
    }

    #[test]
    fn compare_keeps_better_and_reverts_worse() {
        let params = LearnerParams {
            b: 1,
            ..Default::default()
        };
        let a = vec![rec(1, 500.0)];
        let b = vec![rec(2, 500.0)];
        let cands = vec![rec(1, 500.0), rec(2, 500.0)];

        // prev epoch scored -900, current -700: keep
        let mut l = BucketLearner::new(1, &params, 2000.0, true);
        l.explore_next = true;
        l.record_query(&a, trace(0, &[(1, 900.0)])).unwrap();
        let d = l.epoch_update(&a, &cands, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(d.action, Action::Explore);
        l.record_query(&b, trace(1, &[(2, 700.0)])).unwrap();
        let d = l.epoch_update(&b, &cands, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((d.action, d.next.clone()), (Action::Keep, b.clone()));

        // prev -900, current -950: revert
        let mut l = BucketLearner::new(1, &params, 2000.0, true);
        l.explore_next = true;
        l.record_query(&a, trace(0, &[(1, 900.0)])).unwrap();
        l.epoch_update(&a, &cands, 1, &mut ChaCha8Rng::seed_from_u64(0));
        l.record_query(&b, trace(1, &[(2, 950.0)])).unwrap();
        let d = l.epoch_update(&b, &cands, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!((d.action, d.next), (Action::Revert, a));
    }

    #[test]
    fn empty_eligible_set_is_a_noop_and_still_toggles() {
        let params = LearnerParams {
            b: 1,
            rho: vec![10_000.0],
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &params, 100.0, true);
        l.explore_next = true;
        let cur = vec![rec(1, 50.0)];
        l.record_query(&cur, trace(0, &[(1, 9.0)])).unwrap();
        let d = l.epoch_update(
            &cur,
            &[rec(1, 50.0), rec(2, 60.0)],
            1,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(d.action, Action::Noop);
        assert_eq!(d.next, cur);
        assert!(!l.explore_next());
    }

    #[test]
    fn short_bucket_grows_during_exploration() {
        let params = LearnerParams {
            b: 1,
            rho: vec![0.0],
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &params, 100.0, true);
        l.explore_next = true;
        let cur = vec![rec(1, 50.0)];
        l.record_query(&cur, trace(0, &[(1, 9.0)])).unwrap();
        let d = l.epoch_update(
            &cur,
            &[rec(1, 50.0), rec(2, 60.0)],
            4,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(d.action, Action::Explore);
        assert!(d.removed.is_empty());
        assert_eq!(d.next.len(), 2);
    }

    #[test]
    fn inactive_learner_never_changes_the_bucket() {
        let params = LearnerParams {
            b: 1,
            rho: vec![0.0],
            ..Default::default()
        };
        let mut l = BucketLearner::new(1, &params, 100.0, false);
        let cur = vec![rec(1, 50.0)];
        for q in 0..6 {
            l.record_query(&cur, trace(q, &[(1, 9.0)])).unwrap();
            let d = l.epoch_update(&cur, &[rec(2, 60.0)], 4, &mut ChaCha8Rng::seed_from_u64(0));
            assert_eq!(
                (d.action, d.next.as_slice()),
                (Action::Noop, cur.as_slice())
            );
        }
    }
}
