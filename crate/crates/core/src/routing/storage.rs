use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::id::Key;
use crate::network::Topology;

/// Which nodes hold each stored key. Placement is computed directly as the
/// `replicas` XOR-closest nodes; STORE traffic is not simulated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Storage {
    holders: HashMap<Key, Vec<usize>>,
    replicas: usize,
}

impl Storage {
    pub fn holders(&self, key: Key) -> Option<&[usize]> {
        self.holders.get(&key).map(Vec::as_slice)
    }

    #[inline]
    pub fn stores(&self, node: usize, key: Key) -> bool {
        self.holders.get(&key).is_some_and(|h| h.contains(&node))
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.holders.keys()
    }
}

pub fn store_replicated(topo: &Topology, keys: &[Key], replicas: usize) -> Result<Storage> {
    if replicas == 0 {
        return Err(Error::config("replicas must be at least 1"));
    }
    if replicas > topo.len() {
        return Err(Error::config(format!(
            "{replicas} replicas requested in a {}-node network",
            topo.len()
        )));
    }
    let mut holders = HashMap::with_capacity(keys.len());
    let mut order: Vec<usize> = (0..topo.len()).collect();
    for &key in keys {
        order.sort_by_key(|&u| (topo.nodes[u].id.distance(key), topo.nodes[u].id.value()));
        holders.insert(key, order[..replicas].to_vec());
    }
    Ok(Storage { holders, replicas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id::{closest, NodeId};
    use crate::network::{gen_square, Bootstrap, SquareParams};

    fn topo(n: usize) -> Topology {
        let p = SquareParams {
            nodes: n,
            ..Default::default()
        };
        gen_square(&p, Bootstrap::default(), 77).unwrap()
    }

    #[test]
    fn placement_matches_brute_force_closest() {
        let t = topo(16);
        let key = NodeId::new(0x1234, 16).unwrap();
        let s = store_replicated(&t, &[key], 3).unwrap();
        let ids: Vec<NodeId> = t.nodes.iter().map(|n| n.id).collect();
        let want = closest(key, &ids, 3).unwrap();
        let got: Vec<NodeId> = s
            .holders(key)
            .unwrap()
            .iter()
            .map(|&u| t.nodes[u].id)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn full_replication_and_errors() {
        let t = topo(8);
        let key = NodeId::new(7, 16).unwrap();
        let s = store_replicated(&t, &[key], 8).unwrap();
        assert!((0..8).all(|u| s.stores(u, key)));
        assert!(store_replicated(&t, &[key], 9).is_err());
        assert!(store_replicated(&t, &[key], 0).is_err());
    }
}
