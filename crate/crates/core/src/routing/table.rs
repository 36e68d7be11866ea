use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::id::{bucket_index_unchecked, Key, NodeId};
use crate::network::Topology;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerRecord {
    pub id: NodeId,
    /// Index of the peer in the topology; stands in for its address.
    pub node: usize,
    pub rtt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KBucket {
    index: usize,
    peers: Vec<PeerRecord>,
}

impl KBucket {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn peers(&self) -> &[PeerRecord] {
        &self.peers
    }

    pub fn len(&self) -> usize {
        self.peers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peers.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.peers.iter().any(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    owner: NodeId,
    k: usize,
    buckets: Vec<KBucket>,
}

impl RoutingTable {
    pub fn new(owner: NodeId, k: usize) -> Self {
        let buckets = (1..=owner.width() as usize)
            .map(|index| KBucket {
                index,
                peers: Vec::new(),
            })
            .collect();
        RoutingTable { owner, k, buckets }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Bucket `index` (1-based).
    pub fn bucket(&self, index: usize) -> &KBucket {
        &self.buckets[index - 1]
    }

    pub fn buckets(&self) -> &[KBucket] {
        &self.buckets
    }

    pub fn peers(&self) -> impl Iterator<Item = &PeerRecord> {
        self.buckets.iter().flat_map(|b| b.peers.iter())
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(KBucket::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `peer` to its bucket if there is room; returns whether it was added.
    pub fn insert(&mut self, peer: PeerRecord) -> Result<bool> {
        let index = crate::id::bucket_index(self.owner, peer.id)?;
        let k = self.k;
        let bucket = &mut self.buckets[index - 1];
        if bucket.contains(peer.id) || bucket.peers.len() >= k {
            return Ok(false);
        }
        bucket.peers.push(peer);
        Ok(true)
    }

    /// Replaces the contents of bucket `index`, checking its invariants.
    pub fn replace_bucket(&mut self, index: usize, peers: Vec<PeerRecord>) -> Result<()> {
        let owner = self.owner;
        if peers.len() > self.k {
            return Err(Error::config(format!(
                "bucket {index} would hold {} peers (k = {})",
                peers.len(),
                self.k
            )));
        }
        for (i, p) in peers.iter().enumerate() {
            if p.id == owner || bucket_index_unchecked(owner, p.id) != index {
                return Err(Error::config(format!(
                    "peer {} does not belong in bucket {index} of {owner}",
                    p.id
                )));
            }
            if peers[..i].iter().any(|q| q.id == p.id) {
                return Err(Error::config(format!(
                    "duplicate peer {} in bucket {index}",
                    p.id
                )));
            }
        }
        self.buckets[index - 1].peers = peers;
        Ok(())
    }

    /// Verifies prefix soundness, capacity and uniqueness of every bucket.
    pub fn check_invariants(&self) -> Result<()> {
        for b in &self.buckets {
            let mut copy = self.clone();
            copy.replace_bucket(b.index, b.peers.clone())?;
            if b.peers.iter().any(|p| !(p.rtt > 0.0)) {
                return Err(Error::config(format!(
                    "non-positive rtt in bucket {}",
                    b.index
                )));
            }
        }
        Ok(())
    }
}

/// Table-wide peer closest to `target` by XOR distance, ties by ascending ID.
pub fn next_hop_xor(table: &RoutingTable, target: Key) -> Option<&PeerRecord> {
    let owner = table.owner();
    if owner != target {
        // The target's own bucket, when non-empty, always holds the closest peers;
        // otherwise only deeper buckets can beat the owner.
        let j = bucket_index_unchecked(owner, target);
        let bucket = table.bucket(j);
        if !bucket.is_empty() {
            return bucket
                .peers()
                .iter()
                .min_by_key(|p| (p.id.distance(target), p.id.value()));
        }
        let deeper = table.buckets()[j..].iter().flat_map(|b| b.peers.iter());
        if let Some(p) = deeper.min_by_key(|p| (p.id.distance(target), p.id.value())) {
            return Some(p);
        }
    }
    table
        .peers()
        .min_by_key(|p| (p.id.distance(target), p.id.value()))
}

/// Lowest-RTT peer in the target's bucket; falls back to [`next_hop_xor`]
/// when that bucket is empty.
pub fn next_hop_pr(table: &RoutingTable, target: Key) -> Option<&PeerRecord> {
    if table.owner() == target {
        return next_hop_xor(table, target);
    }
    let j = bucket_index_unchecked(table.owner(), target);
    table
        .bucket(j)
        .peers()
        .iter()
        .min_by(|a, b| {
            a.rtt
                .total_cmp(&b.rtt)
                .then(a.id.value().cmp(&b.id.value()))
        })
        .or_else(|| next_hop_xor(table, target))
}

/// Known peers of `owner` grouped by bucket index (1-based; slot 0 unused).
pub fn eligible_by_bucket(topo: &Topology, owner: usize, known: &[usize]) -> Vec<Vec<PeerRecord>> {
    let owner_id = topo.nodes[owner].id;
    let mut groups = vec![Vec::new(); owner_id.width() as usize + 1];
    for &u in known {
        if u == owner {
            continue;
        }
        let id = topo.nodes[u].id;
        groups[bucket_index_unchecked(owner_id, id)].push(PeerRecord {
            id,
            node: u,
            rtt: topo.rtt(owner, u),
        });
    }
    groups
}

/// Fills each bucket with up to `k` eligible known peers drawn uniformly
/// without replacement.
pub fn populate_vanilla(
    topo: &Topology,
    owner: usize,
    known: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> RoutingTable {
    let mut table = RoutingTable::new(topo.nodes[owner].id, k);
    for (index, eligible) in eligible_by_bucket(topo, owner, known)
        .into_iter()
        .enumerate()
        .skip(1)
    {
        let take = eligible.len().min(k);
        let mut picks: Vec<usize> = index::sample(rng, eligible.len(), take).into_vec();
        picks.sort_unstable();
        let peers = picks.into_iter().map(|i| eligible[i]).collect();
        table.buckets[index - 1].peers = peers;
    }
    table
}

/// Fills each bucket with the `k` eligible known peers of lowest RTT, ties
/// by ascending ID.
pub fn populate_pns(topo: &Topology, owner: usize, known: &[usize], k: usize) -> RoutingTable {
    let mut table = RoutingTable::new(topo.nodes[owner].id, k);
    for (index, eligible) in eligible_by_bucket(topo, owner, known)
        .into_iter()
        .enumerate()
        .skip(1)
    {
        table.buckets[index - 1].peers = lowest_rtt(eligible, k);
    }
    table
}

pub(crate) fn lowest_rtt(mut peers: Vec<PeerRecord>, k: usize) -> Vec<PeerRecord> {
    peers.sort_by(|a, b| {
        a.rtt
            .total_cmp(&b.rtt)
            .then(a.id.value().cmp(&b.id.value()))
    });
    peers.truncate(k);
    peers
}
