//! Scenario perturbations applied on top of a generated topology: regional
//! upload-latency overrides, adversarial nodes and per-use latency noise.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::dataset::great_circle_km;
use crate::network::topology::{Location, Topology, TopologyMode};
use crate::seed;

/// Spatial predicate selecting a set of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    /// Axis-aligned rectangle in square coordinates.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// A `size` x `size` square centred in the simulation square.
    CenterSquare { size: f64 },
    /// The `fraction` of nodes geographically closest to a named city.
    NearCity { city: String, fraction: f64 },
    /// Every node hosted in one of the named cities.
    Cities { names: Vec<String> },
    /// Explicit node indices.
    Nodes { indices: Vec<usize> },
}

impl Region {
    pub fn select(&self, t: &Topology) -> Result<Vec<usize>> {
        let mut picked = match self {
            Region::Rect { x0, y0, x1, y1 } => points_within(t, *x0, *y0, *x1, *y1)?,
            Region::CenterSquare { size } => {
                let TopologyMode::Square { side, .. } = t.mode else {
                    return Err(Error::config(
                        "center_square region needs a square topology",
                    ));
                };
                let lo = (side - size) / 2.0;
                points_within(t, lo, lo, lo + size, lo + size)?
            }
            Region::NearCity { city, fraction } => {
                let TopologyMode::RealWorld { cities } = &t.mode else {
                    return Err(Error::config(
                        "near_city region needs a real-world topology",
                    ));
                };
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::config("near_city fraction must be in [0, 1]"));
                }
                let center = cities
                    .iter()
                    .find(|c| &c.name == city)
                    .ok_or_else(|| Error::config(format!("unknown city {city}")))?;
                let mut by_distance: Vec<(f64, usize)> = t
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, n)| match n.location {
                        Location::City(c) => (great_circle_km(center, &cities[c]), i),
                        Location::Point { .. } => unreachable!(),
                    })
                    .collect();
                by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let take = (fraction * t.len() as f64).round() as usize;
                by_distance.into_iter().take(take).map(|(_, i)| i).collect()
            }
            Region::Cities { names } => {
                let TopologyMode::RealWorld { cities } = &t.mode else {
                    return Err(Error::config("cities region needs a real-world topology"));
                };
                (0..t.len())
                    .filter(|&i| match t.nodes[i].location {
                        Location::City(c) => names.iter().any(|n| n == &cities[c].name),
                        Location::Point { .. } => false,
                    })
                    .collect()
            }
            Region::Nodes { indices } => {
                if let Some(bad) = indices.iter().find(|&&i| i >= t.len()) {
                    return Err(Error::config(format!("node index {bad} out of range")));
                }
                indices.clone()
            }
        };
        picked.sort_unstable();
        picked.dedup();
        Ok(picked)
    }
}

fn points_within(t: &Topology, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Vec<usize>> {
    if !matches!(t.mode, TopologyMode::Square { .. }) {
        return Err(Error::config("rectangular regions need a square topology"));
    }
    Ok((0..t.len())
        .filter(|&i| match t.nodes[i].location {
            Location::Point { x, y } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
            Location::City(_) => false,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DeltaOverride {
    /// Replace the upload latency.
    Set(f64),
    /// Multiply the node's own upload latency.
    Scale(f64),
    /// Replace with a multiple of the network-wide mean upload latency.
    MeanMultiple(f64),
}

/// Returns the new topology and the number of nodes changed.
pub fn apply_region_override(
    t: &Topology,
    region: &Region,
    ov: DeltaOverride,
) -> Result<(Topology, usize)> {
    let picked = region.select(t)?;
    if picked.is_empty() {
        log::warn!("region {region:?} selects no nodes; upload latencies unchanged");
        return Ok((t.clone(), 0));
    }
    let mean = t.mean_delta();
    let mut out = t.clone();
    for &i in &picked {
        let d = &mut out.nodes[i].delta;
        *d = match ov {
            DeltaOverride::Set(v) => v,
            DeltaOverride::Scale(f) => *d * f,
            DeltaOverride::MeanMultiple(f) => mean * f,
        };
        if *d < 0.0 {
            return Err(Error::config("override produced a negative upload latency"));
        }
    }
    Ok((out, picked.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    Random,
    /// The nodes with the lowest link latency to `victim`.
    Concentrated {
        victim: usize,
    },
}

pub fn apply_adversaries(
    t: &Topology,
    fraction: f64,
    placement: Placement,
    delay_multiplier: f64,
    seed: u64,
) -> Result<Topology> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config("adversary fraction must be in [0, 1]"));
    }
    if !(delay_multiplier > 0.0) {
        return Err(Error::config("adversary delay multiplier must be positive"));
    }
    let n = t.len();
    let count = (fraction * n as f64).floor() as usize;
    let mut flags = vec![false; n];
    match placement {
        Placement::Random => {
            let mut rng = seed::rng(seed, seed::ADVERSARIES);
            for i in index::sample(&mut rng, n, count) {
                flags[i] = true;
            }
        }
        Placement::Concentrated { victim } => {
            if victim >= n {
                return Err(Error::config(format!("victim {victim} out of range")));
            }
            let mut others: Vec<usize> = (0..n).filter(|&u| u != victim).collect();
            others.sort_by(|&a, &b| {
                t.latency(victim, a)
                    .total_cmp(&t.latency(victim, b))
                    .then(a.cmp(&b))
            });
            for &u in others.iter().take(count) {
                flags[u] = true;
            }
            if count == n {
                flags[victim] = true;
            }
        }
    }
    Ok(t.clone().with_adversaries(&flags, delay_multiplier))
}

/// Per-use perturbation of upload latency: each draw is uniform in
/// `[delta (1 - a), delta (1 + a)]`.
#[derive(Debug, Clone)]
pub struct DeltaNoise {
    amplitude: f64,
    rng: ChaCha8Rng,
}

impl DeltaNoise {
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    #[inline]
    pub fn sample(&mut self, delta: f64) -> f64 {
        if self.amplitude == 0.0 {
            return delta;
        }
        let a = self.amplitude * delta;
        delta + self.rng.random_range(-a..=a)
    }
}

pub fn apply_delta_noise(_t: &Topology, amplitude: f64, seed: u64) -> Result<DeltaNoise> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::config("noise amplitude must be in [0, 1)"));
    }
    Ok(DeltaNoise {
        amplitude,
        rng: seed::rng(seed, seed::DELTA_NOISE),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::topology::{gen_real_world, gen_square, Bootstrap, SquareParams};
    use crate::network::CityDataset;

    fn square(n: usize) -> Topology {
        let p = SquareParams {
            nodes: n,
            ..Default::default()
        };
        gen_square(&p, Bootstrap::default(), 21).unwrap()
    }

    #[test]
    fn center_region_override_touches_exactly_the_region() {
        let t = square(512);
        let region = Region::CenterSquare { size: 2000.0 };
        let expected: Vec<usize> = (0..t.len())
            .filter(|&i| match t.nodes[i].location {
                Location::Point { x, y } => {
                    (4000.0..=6000.0).contains(&x) && (4000.0..=6000.0).contains(&y)
                }
                _ => false,
            })
            .collect();
        assert!(!expected.is_empty());
        let (out, changed) =
            apply_region_override(&t, &region, DeltaOverride::Set(5000.0)).unwrap();
        assert_eq!(changed, expected.len());
        for i in 0..t.len() {
            if expected.contains(&i) {
                assert_eq!(out.nodes[i].delta, 5000.0);
            } else {
                assert_eq!(out.nodes[i], t.nodes[i]);
            }
        }
    }

    #[test]
    fn empty_region_is_identity() {
        let t = square(64);
        let region = Region::Rect {
            x0: -10.0,
            y0: -10.0,
            x1: -5.0,
            y1: -5.0,
        };
        let (out, changed) = apply_region_override(&t, &region, DeltaOverride::Set(1.0)).unwrap();
        assert_eq!(changed, 0);
        assert_eq!(out, t);
    }

    #[test]
    fn near_city_doubles_mean() {
        let ds = CityDataset::builtin();
        let t = gen_real_world(&ds, 512, 1000.0, Bootstrap::default(), 3).unwrap();
        let mean = t.mean_delta();
        let region = Region::NearCity {
            city: "New York".into(),
            fraction: 0.04,
        };
        let (out, changed) =
            apply_region_override(&t, &region, DeltaOverride::MeanMultiple(2.0)).unwrap();
        assert_eq!(changed, 20);
        let ny = ds.city_index("New York").unwrap();
        let hit = out
            .nodes
            .iter()
            .filter(|n| (n.delta - 2.0 * mean).abs() < 1e-9)
            .count();
        assert_eq!(hit, 20);
        // New York hosts plenty of nodes, so every picked node is in New York.
        for (a, b) in out.nodes.iter().zip(&t.nodes) {
            if a.delta != b.delta {
                assert_eq!(a.location, Location::City(ny));
            }
        }
    }

    #[test]
    fn adversary_counts_and_identity_cases() {
        let t = square(100);
        let a = apply_adversaries(&t, 0.2, Placement::Random, 3.0, 1).unwrap();
        assert_eq!(a.nodes.iter().filter(|n| n.adversarial).count(), 20);
        let none = apply_adversaries(&t, 0.0, Placement::Random, 3.0, 1).unwrap();
        assert!(none.nodes.iter().all(|n| !n.adversarial));
        let all = apply_adversaries(&t, 1.0, Placement::Random, 1.0, 1).unwrap();
        assert!(all.nodes.iter().all(|n| n.adversarial));
        for w in 0..all.len() {
            assert_eq!(all.upload_cost(w, 700.0), 700.0);
            assert_eq!(all.forward_extra(w, 700.0), 0.0);
        }
        assert!(apply_adversaries(&t, 1.5, Placement::Random, 3.0, 1).is_err());
    }

    #[test]
    fn concentrated_adversaries_are_nearest_to_victim() {
        let t = square(100);
        let a = apply_adversaries(&t, 0.1, Placement::Concentrated { victim: 7 }, 3.0, 1).unwrap();
        assert!(!a.nodes[7].adversarial);
        let worst_adv = (0..100)
            .filter(|&u| a.nodes[u].adversarial)
            .map(|u| t.latency(7, u))
            .fold(0.0, f64::max);
        let best_honest = (0..100)
            .filter(|&u| u != 7 && !a.nodes[u].adversarial)
            .map(|u| t.latency(7, u))
            .fold(f64::INFINITY, f64::min);
        assert!(worst_adv <= best_honest);
        assert_eq!(
            a.upload_cost(0, 100.0),
            if a.nodes[0].adversarial { 300.0 } else { 100.0 }
        );
    }

    #[test]
    fn noise_stays_in_band() {
        let t = square(4);
        let mut noise = apply_delta_noise(&t, 0.05, 9).unwrap();
        for _ in 0..100_000 {
            let d = noise.sample(1000.0);
            assert!((950.0..=1050.0).contains(&d));
        }
        let mut zero = apply_delta_noise(&t, 0.0, 9).unwrap();
        assert_eq!(zero.sample(123.0), 123.0);
        assert!(apply_delta_noise(&t, 1.0, 9).is_err());
    }
}
