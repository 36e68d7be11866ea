//! Property bodies shared by the proptest suite and the acceptance runner.

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use kadsim::harness::{self, catalog, ScenarioConfig, TopologyConfig};
use kadsim::id::{bucket_index, xor_distance, NodeId};
use kadsim::routing::{App, RoutingMode, SimParams, Simulation};

use super::{learner, sim, square, STRATEGIES};

pub fn routing_mode() -> impl Strategy<Value = RoutingMode> {
    prop_oneof![Just(RoutingMode::Recursive), Just(RoutingMode::Iterative)]
}

pub fn xor_metric(width: u8, a: u64, b: u64, c: u64) -> Result<(), TestCaseError> {
    let mask = (1u64 << width) - 1;
    let id = |v: u64| NodeId::new(v & mask, width).unwrap();
    let (a, b, c) = (id(a), id(b), id(c));
    let d = |x, y| xor_distance(x, y).unwrap().value();

    prop_assert_eq!(d(a, a), 0);
    prop_assert_eq!(d(a, b), d(b, a));
    prop_assert_eq!(d(a, b) == 0, a == b);
    prop_assert!(u128::from(d(a, c)) <= u128::from(d(a, b)) + u128::from(d(b, c)));
    prop_assert_eq!(d(a, c), d(a, b) ^ d(b, c));
    // exactly one point lies at a given distance from a
    prop_assert_eq!(id(a.value() ^ d(a, b)), b);
    if a != b {
        let i = bucket_index(a, b).unwrap();
        prop_assert_eq!(i, bucket_index(b, a).unwrap());
        // bucket i holds distances in [2^(w-i), 2^(w-i+1))
        let low = 1u64 << (u32::from(width) - i as u32);
        prop_assert!(d(a, b) >= low && d(a, b) / 2 < low);
    } else {
        prop_assert!(bucket_index(a, b).is_err());
    }
    Ok(())
}

/// Every bucket holds at most k distinct peers sharing exactly `i - 1`
/// leading bits with the owner.
pub fn tables_sound(s: &Simulation) -> Result<(), TestCaseError> {
    for t in s.tables() {
        let owner = t.owner();
        for b in t.buckets() {
            prop_assert!(b.len() <= t.k());
            for (j, p) in b.peers().iter().enumerate() {
                prop_assert_eq!(usize::from(owner.common_prefix_len(p.id)) + 1, b.index());
                prop_assert!(b.peers()[..j].iter().all(|q| q.id != p.id));
            }
        }
    }
    Ok(())
}

/// Lookups make strict XOR progress, stay shorter than the node count, and
/// leave every table prefix-sound while a fast learner reshapes buckets.
pub fn progress_and_soundness(
    n: usize,
    seed: u64,
    strategy: usize,
    routing: RoutingMode,
) -> Result<(), TestCaseError> {
    let topo = square(n, seed, false);
    let params = SimParams {
        routing,
        seed,
        ..SimParams::default()
    };
    let mut s = sim(&topo, STRATEGIES[strategy], params, learner(3));
    tables_sound(&s)?;
    for round in 0..400usize {
        let src = (round * 7 + seed as usize) % n;
        let key = NodeId::new(
            (seed
                .wrapping_mul(31)
                .wrapping_add(round as u64 * 2654435761))
                & 0xffff,
            16,
        )
        .unwrap();
        let r = s.lookup(src, key).unwrap();
        for path in &r.paths {
            prop_assert!(
                path.hop_count() < n,
                "path of {} hops in {n} nodes",
                path.hop_count()
            );
            let dist: Vec<u64> = path
                .nodes()
                .map(|v| topo.nodes[v].id.distance(key).value())
                .collect();
            prop_assert!(
                dist.windows(2).all(|w| w[1] < w[0]),
                "no strict progress: {dist:?}"
            );
        }
        tables_sound(&s)?;
    }
    Ok(())
}

/// The reported DHT latency is the earliest successful path completion,
/// or the last completion when every path fails.
pub fn dht_min_over_paths(
    n: usize,
    seed: u64,
    strategy: usize,
    alpha: usize,
) -> Result<(), TestCaseError> {
    let topo = square(n, seed, false);
    let params = SimParams {
        app: App::Dht,
        alpha,
        seed,
        ..SimParams::default()
    };
    let mut s = sim(&topo, STRATEGIES[strategy], params, learner(4));
    for round in 0..100usize {
        let src = (round * 11 + 1) % n;
        let key = NodeId::new((round as u64 * 40503 + seed) & 0xffff, 16).unwrap();
        let r = s.lookup(src, key).unwrap();
        prop_assert!(r.paths.len() <= alpha);
        if r.paths.is_empty() {
            prop_assert_eq!(r.latency, 0.0);
            continue;
        }
        let ok = r.paths.iter().filter(|p| p.success).map(|p| p.completed_at);
        match ok.reduce(f64::min) {
            Some(best) => {
                prop_assert!(r.success);
                prop_assert_eq!(r.latency, best);
            }
            None => {
                prop_assert!(!r.success);
                let last = r.paths.iter().map(|p| p.completed_at).fold(0.0, f64::max);
                prop_assert_eq!(r.latency, last);
            }
        }
    }
    Ok(())
}

/// Small full-output scenario used for the reproducibility check.
pub fn small_config(seed: u64, app: App) -> ScenarioConfig {
    let mut cfg = catalog::scenario("square-uniform").unwrap();
    cfg.name = "repro".into();
    cfg.seed = seed;
    cfg.rounds = 3_000;
    cfg.until_epochs = None;
    cfg.record_queries = true;
    cfg.app = app;
    cfg.learner.b = 10;
    cfg.noise = 0.05;
    if let TopologyConfig::Square {
        nodes, known_peers, ..
    } = &mut cfg.topology
    {
        *nodes = 64;
        *known_peers = 40;
    }
    cfg.validate().unwrap();
    cfg
}

fn read_tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Two runs of one seeded config write identical files.
pub fn byte_identical_outputs(seed: u64, app: App) -> Result<(), TestCaseError> {
    let cfg = small_config(seed, app);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    harness::simulate(&cfg, a.path()).unwrap();
    harness::simulate(&cfg, b.path()).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    prop_assert!(ta.len() >= 6, "only {} files written", ta.len());
    prop_assert_eq!(
        ta.iter().map(|f| &f.0).collect::<Vec<_>>(),
        tb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((name, x), (_, y)) in ta.iter().zip(&tb) {
        prop_assert!(x == y, "{name} differs between runs");
    }
    Ok(())
}
