use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::id::{sample_unique_ids, NodeId, DEFAULT_WIDTH};
use crate::network::dataset::{City, CityDataset};
use crate::seed;

/// Same-city node pairs communicate over a 1 ms link.
pub const SAME_CITY_LATENCY_MS: f64 = 1.0;

pub const DEFAULT_KNOWN_PEERS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Point { x: f64, y: f64 },
    City(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimNode {
    pub id: NodeId,
    pub location: Location,
    /// Upload latency charged each time the node sends a response.
    pub delta: f64,
    pub adversarial: bool,
    /// Bootstrap knowledge: indices of other nodes this node can contact.
    pub known_peers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyMode {
    Square {
        side: f64,
        noise_hi: f64,
    },
    RealWorld {
        cities: Vec<City>,
    },
    /// Hand-built latency matrix.
    Explicit,
}

/// Immutable node placement plus the pairwise link latency `l(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<SimNode>,
    pub mode: TopologyMode,
    latency: Vec<f64>,
    adversary_multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquareParams {
    pub nodes: usize,
    pub side: f64,
    pub noise_lo: f64,
    pub noise_hi: f64,
    pub delta_lo: f64,
    pub delta_hi: f64,
}

impl Default for SquareParams {
    fn default() -> Self {
        SquareParams {
            nodes: 2048,
            side: 10_000.0,
            noise_lo: 100.0,
            noise_hi: 5_000.0,
            delta_lo: 100.0,
            delta_hi: 2_000.0,
        }
    }
}

/// ID width and bootstrap knowledge size shared by both generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bootstrap {
    pub id_bits: u8,
    pub known_peers: usize,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Bootstrap {
            id_bits: DEFAULT_WIDTH,
            known_peers: DEFAULT_KNOWN_PEERS,
        }
    }
}

impl Topology {
    /// Topology from explicit nodes and a row-major `n x n` link-latency
    /// matrix (symmetric, non-negative, zero diagonal).
    pub fn explicit(nodes: Vec<SimNode>, latency: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::config("a topology needs at least two nodes"));
        }
        if latency.len() != n * n {
            return Err(Error::config(format!(
                "latency matrix must have {} entries",
                n * n
            )));
        }
        let width = nodes[0].id.width();
        for (u, node) in nodes.iter().enumerate() {
            if node.id.width() != width {
                return Err(Error::WidthMismatch {
                    left: width,
                    right: node.id.width(),
                });
            }
            if nodes[..u].iter().any(|o| o.id == node.id) {
                return Err(Error::config(format!("duplicate node ID {}", node.id)));
            }
            if !(node.delta >= 0.0) {
                return Err(Error::config("upload latency must be non-negative"));
            }
            if let Some(&bad) = node.known_peers.iter().find(|&&p| p >= n || p == u) {
                return Err(Error::config(format!("node {u} cannot know peer {bad}")));
            }
            for v in 0..n {
                let l = latency[u * n + v];
                if !(l >= 0.0) || l != latency[v * n + u] || (u == v && l != 0.0) {
                    return Err(Error::config(format!("bad latency entry ({u}, {v}) = {l}")));
                }
            }
        }
        Ok(Topology {
            nodes,
            mode: TopologyMode::Explicit,
            latency,
            adversary_multiplier: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn latency(&self, u: usize, v: usize) -> f64 {
        self.latency[u * self.nodes.len() + v]
    }

    /// Ping-style round-trip time; upload latency is excluded.
    #[inline]
    pub fn rtt(&self, u: usize, v: usize) -> f64 {
        2.0 * self.latency(u, v)
    }

    pub fn adversary_multiplier(&self) -> f64 {
        self.adversary_multiplier
    }

    /// Time node `w` spends uploading a response when its nominal upload
    /// latency for this use is `delta`.
    #[inline]
    pub fn upload_cost(&self, w: usize, delta: f64) -> f64 {
        if self.nodes[w].adversarial {
            delta * self.adversary_multiplier
        } else {
            delta
        }
    }

    /// Extra delay an adversarial node adds before forwarding a query.
    #[inline]
    pub fn forward_extra(&self, w: usize, delta: f64) -> f64 {
        if self.nodes[w].adversarial {
            (delta * (self.adversary_multiplier - 1.0)).max(0.0)
        } else {
            0.0
        }
    }

    /// Upper-bound estimate of a single link latency across the network.
    pub fn diameter_estimate(&self) -> f64 {
        match &self.mode {
            TopologyMode::Square { side, noise_hi } => side * std::f64::consts::SQRT_2 + noise_hi,
            TopologyMode::RealWorld { .. } | TopologyMode::Explicit => {
                self.latency.iter().copied().fold(0.0, f64::max)
            }
        }
    }

    pub fn mean_delta(&self) -> f64 {
        self.nodes.iter().map(|n| n.delta).sum::<f64>() / self.nodes.len() as f64
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn city_name(&self, node: usize) -> Option<&str> {
        match (&self.mode, self.nodes[node].location) {
            (TopologyMode::RealWorld { cities }, Location::City(c)) => Some(&cities[c].name),
            _ => None,
        }
    }

    pub(crate) fn with_adversaries(mut self, flags: &[bool], multiplier: f64) -> Self {
        for (node, &flag) in self.nodes.iter_mut().zip(flags) {
            node.adversarial = flag;
        }
        self.adversary_multiplier = multiplier;
        self
    }
}

fn bootstrap_known<R: Rng>(n: usize, known: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let take = known.min(n - 1);
    (0..n)
        .map(|v| {
            let mut peers: Vec<usize> = index::sample(rng, n - 1, take)
                .into_iter()
                .map(|i| if i >= v { i + 1 } else { i })
                .collect();
            peers.sort_unstable();
            peers
        })
        .collect()
}

pub fn gen_square(params: &SquareParams, boot: Bootstrap, seed: u64) -> Result<Topology> {
    let n = params.nodes;
    if n < 2 {
        return Err(Error::config("a square topology needs at least two nodes"));
    }
    if !(params.noise_lo >= 0.0 && params.noise_lo <= params.noise_hi) {
        return Err(Error::config(
            "square link noise needs 0 <= noise_lo <= noise_hi",
        ));
    }
    if !(params.delta_lo >= 0.0 && params.delta_lo <= params.delta_hi) {
        return Err(Error::config(
            "square upload latency needs 0 <= delta_lo <= delta_hi",
        ));
    }
    if params.side <= 0.0 && params.noise_lo <= 0.0 {
        return Err(Error::config("square links would have zero latency"));
    }
    let ids = sample_unique_ids(boot.id_bits, n, &mut seed::rng(seed, seed::IDS))?;

    let mut place = seed::rng(seed, seed::PLACEMENT);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            (
                place.random_range(0.0..=params.side),
                place.random_range(0.0..=params.side),
            )
        })
        .collect();

    let mut deltas_rng = seed::rng(seed, seed::DELTAS);
    let deltas: Vec<f64> = (0..n)
        .map(|_| deltas_rng.random_range(params.delta_lo..=params.delta_hi))
        .collect();

    let mut noise = seed::rng(seed, seed::LINK_NOISE);
    let mut latency = vec![0.0; n * n];
    for u in 0..n {
        for v in (u + 1)..n {
            let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
            let w = noise.random_range(params.noise_lo..=params.noise_hi);
            let l = (dx * dx + dy * dy).sqrt() + w;
            latency[u * n + v] = l;
            latency[v * n + u] = l;
        }
    }

    let known = bootstrap_known(n, boot.known_peers, &mut seed::rng(seed, seed::BOOTSTRAP));
    let nodes = ids
        .into_iter()
        .zip(points)
        .zip(deltas)
        .zip(known)
        .map(|(((id, (x, y)), delta), known_peers)| SimNode {
            id,
            location: Location::Point { x, y },
            delta,
            adversarial: false,
            known_peers,
        })
        .collect();
    Ok(Topology {
        nodes,
        mode: TopologyMode::Square {
            side: params.side,
            noise_hi: params.noise_hi,
        },
        latency,
        adversary_multiplier: 1.0,
    })
}

pub fn gen_real_world(
    dataset: &CityDataset,
    node_count: usize,
    delta_mean: f64,
    boot: Bootstrap,
    seed: u64,
) -> Result<Topology> {
    if node_count < 2 {
        return Err(Error::config(
            "a real-world topology needs at least two nodes",
        ));
    }
    if delta_mean <= 0.0 {
        return Err(Error::config("delta_mean must be positive"));
    }
    let mut slots: Vec<usize> = dataset
        .node_cities()
        .iter()
        .flat_map(|&(city, count)| std::iter::repeat_n(city, count as usize))
        .collect();
    if node_count > slots.len() {
        return Err(Error::config(format!(
            "dataset hosts {} nodes, {node_count} requested",
            slots.len()
        )));
    }
    let mut place = seed::rng(seed, seed::PLACEMENT);
    let picked = index::sample(&mut place, slots.len(), node_count);
    let mut chosen: Vec<usize> = picked.into_iter().map(|i| slots[i]).collect();
    // Group by city so node indices are readable; the sample itself is random.
    chosen.sort_unstable();
    slots.clear();

    let ids = sample_unique_ids(boot.id_bits, node_count, &mut seed::rng(seed, seed::IDS))?;
    let exp = Exp::new(1.0 / delta_mean).map_err(|e| Error::config(e.to_string()))?;
    let mut deltas_rng = seed::rng(seed, seed::DELTAS);
    let deltas: Vec<f64> = (0..node_count)
        .map(|_| exp.sample(&mut deltas_rng))
        .collect();

    let n = node_count;
    let mut latency = vec![0.0; n * n];
    for u in 0..n {
        for v in (u + 1)..n {
            let l = dataset.city_latency(chosen[u], chosen[v]);
            latency[u * n + v] = l;
            latency[v * n + u] = l;
        }
    }

    let known = bootstrap_known(n, boot.known_peers, &mut seed::rng(seed, seed::BOOTSTRAP));
    let nodes = ids
        .into_iter()
        .zip(chosen)
        .zip(deltas)
        .zip(known)
        .map(|(((id, city), delta), known_peers)| SimNode {
            id,
            location: Location::City(city),
            delta,
            adversarial: false,
            known_peers,
        })
        .collect();
    Ok(Topology {
        nodes,
        mode: TopologyMode::RealWorld {
            cities: dataset.cities().to_vec(),
        },
        latency,
        adversary_multiplier: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> Topology {
        let p = SquareParams {
            nodes: n,
            ..SquareParams::default()
        };
        gen_square(&p, Bootstrap::default(), seed).unwrap()
    }

    #[test]
    fn square_defaults_are_the_reference_setting() {
        let p = SquareParams::default();
        assert_eq!(
            (p.nodes, p.side, p.noise_lo, p.noise_hi, p.delta_lo, p.delta_hi),
            (2048, 10_000.0, 100.0, 5_000.0, 100.0, 2_000.0)
        );
    }

    #[test]
    fn two_node_square_is_symmetric() {
        let t = small(2, 9);
        assert_eq!(t.latency(0, 1), t.latency(1, 0));
        assert!(t.latency(0, 1) > 0.0);
    }

    #[test]
    fn square_latency_bounds() {
        let t = small(200, 4);
        let diag = 10_000.0 * std::f64::consts::SQRT_2;
        for u in 0..t.len() {
            for v in 0..t.len() {
                if u == v {
                    continue;
                }
                let (Location::Point { x: ux, y: uy }, Location::Point { x: vx, y: vy }) =
                    (t.nodes[u].location, t.nodes[v].location)
                else {
                    unreachable!()
                };
                let euclid = ((ux - vx).powi(2) + (uy - vy).powi(2)).sqrt();
                let l = t.latency(u, v);
                assert!(l >= euclid + 100.0 - 1e-9 && l <= diag + 5_000.0);
                assert_eq!(l, t.latency(v, u));
            }
        }
    }

    #[test]
    fn square_noise_mean_matches_range_midpoint() {
        let t = small(512, 11);
        let mut sum = 0.0;
        let mut count = 0usize;
        for u in 0..t.len() {
            for v in (u + 1)..t.len() {
                let (Location::Point { x: ux, y: uy }, Location::Point { x: vx, y: vy }) =
                    (t.nodes[u].location, t.nodes[v].location)
                else {
                    unreachable!()
                };
                sum += t.latency(u, v) - ((ux - vx).powi(2) + (uy - vy).powi(2)).sqrt();
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(
            (mean - 2_550.0).abs() <= 0.05 * 2_550.0,
            "mean noise {mean}"
        );
    }

    #[test]
    fn square_is_deterministic_and_seed_sensitive() {
        assert_eq!(small(64, 5), small(64, 5));
        assert_ne!(small(64, 5), small(64, 6));
    }

    #[test]
    fn bootstrap_excludes_self_and_respects_size() {
        let t = small(300, 2);
        for (v, node) in t.nodes.iter().enumerate() {
            assert_eq!(node.known_peers.len(), 256);
            assert!(!node.known_peers.contains(&v));
            assert!(node.delta >= 100.0 && node.delta <= 2_000.0);
        }
        let tiny = small(10, 2);
        assert!(tiny.nodes.iter().all(|n| n.known_peers.len() == 9));
    }

    #[test]
    fn square_rejects_oversized_networks() {
        let p = SquareParams {
            nodes: 20,
            ..SquareParams::default()
        };
        let boot = Bootstrap {
            id_bits: 4,
            known_peers: 8,
        };
        assert!(gen_square(&p, boot, 1).is_err());
        let p1 = SquareParams {
            nodes: 1,
            ..SquareParams::default()
        };
        assert!(gen_square(&p1, Bootstrap::default(), 1).is_err());
    }

    #[test]
    fn square_diameter_bound() {
        let t = small(4, 1);
        assert!((t.diameter_estimate() - (10_000.0 * 2f64.sqrt() + 5_000.0)).abs() < 1e-9);
    }

    #[test]
    fn real_world_upload_latency_is_exponential_around_the_mean() {
        let ds = crate::network::CityDataset::builtin();
        let boot = Bootstrap {
            id_bits: 16,
            known_peers: 64,
        };
        let t = gen_real_world(&ds, 1000, 1_000.0, boot, 7).unwrap();
        let m = t.mean_delta();
        assert!((m - 1_000.0).abs() < 100.0, "mean delta {m}");
        // Exp(1/1000) puts about 63% of the mass below the mean
        let below = t.nodes.iter().filter(|n| n.delta < 1_000.0).count() as f64 / 1000.0;
        assert!((below - 0.632).abs() < 0.05, "{below}");
        for u in [0, 17, 400] {
            for v in [3, 250, 999] {
                let (Location::City(a), Location::City(b)) =
                    (t.nodes[u].location, t.nodes[v].location)
                else {
                    panic!("real-world nodes sit in cities");
                };
                assert_eq!(t.latency(u, v), ds.city_latency(a, b));
            }
        }
        let again = gen_real_world(&ds, 1000, 1_000.0, boot, 7).unwrap();
        assert_eq!(t.nodes, again.nodes);
    }
}
