//! Builds a scenario and runs every selected strategy over it.
//!
//! All strategies of one run share the topology, the observed nodes, the
//! stored keys and the demand stream, so their results are paired.

use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{AdversaryPlacement, ScenarioConfig, TopologyConfig};
use crate::harness::emit;
use crate::harness::metrics::{
    median, percentile, MetricsStore, QueryRecord, StrategyRun, Summary,
};
use crate::id::Key;
use crate::network::{
    apply_adversaries, apply_region_override, gen_real_world, gen_square, Bootstrap, CityDataset,
    Placement, SquareParams, Topology,
};
use crate::routing::{
    store_replicated, App, LookupResult, SimParams, Simulation, Storage, StrategyOptions,
    StrategyRegistry,
};
use crate::seed;
use crate::workload::{dht_keys, Workload};

/// Shared, strategy-independent state of a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub topo: Arc<Topology>,
    pub observed: Vec<usize>,
    pub storage: Option<Storage>,
    /// Demand targets: node IDs for KBR, stored keys for DHT.
    pub targets: Vec<Key>,
    /// Fixed (source, key) pair for the path dump.
    pub path_pair: (usize, Key),
}

pub fn build_topology(cfg: &ScenarioConfig) -> Result<Topology> {
    let mut topo = match &cfg.topology {
        TopologyConfig::Square {
            nodes,
            id_bits,
            known_peers,
            side,
            link_latency,
            delta,
            ..
        } => {
            let params = SquareParams {
                nodes: *nodes,
                side: *side,
                noise_lo: link_latency[0],
                noise_hi: link_latency[1],
                delta_lo: delta[0],
                delta_hi: delta[1],
            };
            let boot = Bootstrap {
                id_bits: *id_bits,
                known_peers: *known_peers,
            };
            gen_square(&params, boot, cfg.seed)?
        }
        TopologyConfig::RealWorld {
            nodes,
            id_bits,
            known_peers,
            delta_mean,
            dataset,
            ..
        } => {
            let data = match dataset {
                Some(dir) => CityDataset::load(
                    &dir.join("cities.csv"),
                    &dir.join("pings.csv"),
                    &dir.join("node_cities.csv"),
                )?,
                None => CityDataset::builtin(),
            };
            let boot = Bootstrap {
                id_bits: *id_bits,
                known_peers: *known_peers,
            };
            gen_real_world(&data, *nodes, *delta_mean, boot, cfg.seed)?
        }
    };
    for ov in cfg.topology.overrides() {
        let (next, changed) = apply_region_override(&topo, &ov.region, ov.delta)?;
        log::info!("upload-latency override touched {changed} nodes");
        topo = next;
    }
    Ok(topo)
}

fn pick_observed(cfg: &ScenarioConfig, topo: &Topology) -> Result<Vec<usize>> {
    if !cfg.observe.nodes.is_empty() {
        return Ok(cfg.observe.nodes.clone());
    }
    let pool: Vec<usize> = match &cfg.observe.region {
        Some(region) => region.select(topo)?,
        None => (0..topo.len()).collect(),
    };
    if pool.len() < cfg.observe.count {
        return Err(Error::config(format!(
            "cannot observe {} nodes out of {} eligible",
            cfg.observe.count,
            pool.len()
        )));
    }
    let mut rng = seed::rng(cfg.seed, seed::OBSERVE);
    Ok(index::sample(&mut rng, pool.len(), cfg.observe.count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let mut topo = build_topology(cfg)?;
    let observed = pick_observed(cfg, &topo)?;
    if let Some(adv) = &cfg.adversary {
        let placement = match adv.placement {
            AdversaryPlacement::Random => Placement::Random,
            AdversaryPlacement::Concentrated => Placement::Concentrated {
                victim: *observed.first().ok_or_else(|| {
                    Error::config("concentrated adversaries need an observed victim node")
                })?,
            },
        };
        topo = apply_adversaries(&topo, adv.fraction, placement, adv.multiplier, cfg.seed)?;
    }
    let width = cfg.topology.id_bits();
    let (storage, targets) = match cfg.app {
        App::Kbr => (None, topo.nodes.iter().map(|n| n.id).collect()),
        App::Dht => {
            let keys = dht_keys(width, cfg.dht_keys.unwrap_or(topo.len()), cfg.seed)?;
            (Some(store_replicated(&topo, &keys, cfg.replicas)?), keys)
        }
    };
    let source = observed.first().copied().unwrap_or(0);
    let mut rng = seed::rng(cfg.seed, seed::PATH_PAIR);
    let key = loop {
        let k: Key = targets[rng.random_range(0..targets.len())];
        if k != topo.nodes[source].id || targets.len() == 1 {
            break k;
        }
    };
    Ok(Prepared {
        topo: Arc::new(topo),
        observed,
        storage,
        targets,
        path_pair: (source, key),
    })
}

/// Runs one strategy; `on_lookup` sees every round's result.
pub fn run_strategy(
    cfg: &ScenarioConfig,
    prep: &Prepared,
    strategy: &str,
    replay_window: Option<u64>,
    mut on_lookup: impl FnMut(u64, &LookupResult),
) -> Result<StrategyRun> {
    let registry = StrategyRegistry::builtin();
    let opts = StrategyOptions {
        learner: cfg.learner.clone(),
    };
    let params = SimParams {
        k: cfg.k,
        alpha: cfg.alpha(),
        app: cfg.app,
        routing: cfg.routing,
        noise: cfg.noise,
        observed: prep.observed.clone(),
        seed: cfg.seed,
        observer: cfg.learner.clone(),
    };
    let mut sim = Simulation::new(
        prep.topo.clone(),
        registry.build(strategy, &opts)?,
        params,
        prep.storage.clone(),
    )?;
    let demand = cfg.demand.build(prep.targets.clone(), cfg.seed)?;
    let mut workload = Workload::new(demand, cfg.seed);
    if let Some(w) = replay_window {
        workload = workload.with_replay(w, cfg.rounds)?;
    }

    let mut run = StrategyRun {
        strategy: strategy.to_string(),
        rounds: 0,
        latencies: Vec::new(),
        successes: 0,
        queries: Vec::new(),
        epochs: Vec::new(),
        explorations: Vec::new(),
        sample_path: None,
    };
    for round in 0..cfg.rounds {
        if let Some(target) = cfg.until_epochs {
            if !prep.observed.is_empty()
                && prep
                    .observed
                    .iter()
                    .all(|&v| sim.epochs_completed(v, 1) >= target)
            {
                break;
            }
        }
        let (source, key) = workload.next_round(&prep.topo)?;
        let result = sim.lookup(source, key)?;
        run.rounds += 1;
        run.latencies.push(result.latency);
        run.successes += u64::from(result.success);
        if cfg.record_queries {
            run.queries
                .push(QueryRecord::from_lookup(round, strategy, &result));
        }
        on_lookup(round, &result);
    }
    let (src, key) = prep.path_pair;
    run.sample_path = Some(sim.probe(src, key)?);
    run.epochs = sim.take_epochs();
    run.explorations = sim.explorations().to_vec();
    log::info!(
        "{} seed {}: {strategy} finished {} rounds",
        cfg.name,
        cfg.seed,
        run.rounds
    );
    Ok(run)
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsStore> {
    run_prepared(cfg, &prepare(cfg)?)
}

pub fn run_prepared(cfg: &ScenarioConfig, prep: &Prepared) -> Result<MetricsStore> {
    let runs = cfg
        .strategies
        .par_iter()
        .map(|s| run_strategy(cfg, prep, s, None, |_, _| {}))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsStore {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        app: cfg.app,
        observed_ids: prep
            .observed
            .iter()
            .map(|&v| prep.topo.nodes[v].id)
            .collect(),
        observed: prep.observed.clone(),
        runs,
    })
}

/// Runs and writes every output file into `out`.
pub fn simulate(cfg: &ScenarioConfig, out: &Path) -> Result<Summary> {
    let prep = prepare(cfg)?;
    let store = run_prepared(cfg, &prep)?;
    let summary = emit::write_all(&store, out)?;
    emit::write_paths(&store, &prep.topo, out)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowHistogram {
    pub strategy: String,
    pub first: Vec<f64>,
    pub last: Vec<f64>,
    pub p90_first: f64,
    pub p90_last: f64,
    /// `p90_last / p90_first`.
    pub ratio: f64,
}

/// Latencies of the first and last `window` rounds, which replay the same
/// (source, target) sequence.
pub fn before_after_histogram(cfg: &ScenarioConfig, window: u64) -> Result<Vec<WindowHistogram>> {
    if window == 0 || cfg.rounds < 2 * window {
        return Err(Error::config(format!(
            "window {window} needs at least {} rounds, got {}",
            2 * window.max(1),
            cfg.rounds
        )));
    }
    let mut cfg = cfg.clone();
    cfg.until_epochs = None;
    cfg.record_queries = false;
    let prep = prepare(&cfg)?;
    let start_last = cfg.rounds - window;
    cfg.strategies
        .par_iter()
        .map(|s| {
            let mut first = Vec::with_capacity(window as usize);
            let mut last = Vec::with_capacity(window as usize);
            run_strategy(&cfg, &prep, s, Some(window), |round, r| {
                if round < window {
                    first.push(r.latency);
                } else if round >= start_last {
                    last.push(r.latency);
                }
            })?;
            let p90 = |v: &[f64]| {
                let mut s = v.to_vec();
                s.sort_by(f64::total_cmp);
                percentile(&s, 90.0).unwrap_or(0.0)
            };
            let (p90_first, p90_last) = (p90(&first), p90(&last));
            Ok(WindowHistogram {
                strategy: s.clone(),
                p90_first,
                p90_last,
                ratio: p90_last / p90_first,
                first,
                last,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub strategy: String,
    pub seeds: Vec<u64>,
    /// Mean lookup latency per seed.
    pub means: Vec<Option<f64>>,
    /// Converged first-bucket latency of the first observed node per seed.
    pub converged: Vec<Option<f64>>,
    pub median_mean: Option<f64>,
    pub median_converged: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub rows: Vec<CompareRow>,
    pub summaries: Vec<Summary>,
}

/// Runs `cfg` once per seed and reports per-strategy medians.
pub fn compare(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<CompareReport> {
    let summaries = seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            c.record_queries = false;
            run_scenario(&c).map(|store| store.summary())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = cfg
        .strategies
        .iter()
        .map(|name| {
            let per_seed: Vec<_> = summaries.iter().filter_map(|s| s.strategy(name)).collect();
            let means: Vec<Option<f64>> = per_seed.iter().map(|s| s.mean).collect();
            let converged: Vec<Option<f64>> = per_seed
                .iter()
                .map(|s| s.observed.first().and_then(|o| o.converged))
                .collect();
            let flat = |v: &[Option<f64>]| v.iter().flatten().copied().collect::<Vec<_>>();
            CompareRow {
                strategy: name.clone(),
                seeds: seeds.to_vec(),
                median_mean: median(&flat(&means)),
                median_converged: median(&flat(&converged)),
                means,
                converged,
            }
        })
        .collect();
    Ok(CompareReport {
        scenario: cfg.name.clone(),
        rows,
        summaries,
    })
}
