//! Fixed-width binary identifiers and the XOR metric.
//!
//! Node IDs and lookup keys share one type. Bit 1 is the most significant
//! bit of the `width`-bit string, so bucket `i` holds peers that agree with
//! the owner on bits `1..i` and differ at bit `i`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: u8 = 63;
pub const DEFAULT_WIDTH: u8 = 16;

/// A `width`-bit identifier. Keys use the same representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    value: u64,
    width: u8,
}

pub type Key = NodeId;

impl NodeId {
    pub fn new(value: u64, width: u8) -> Result<Self> {
        if width == 0 || width > MAX_WIDTH {
            return Err(Error::config(format!(
                "identifier width must be in 1..={MAX_WIDTH}, got {width}"
            )));
        }
        if value >> width != 0 {
            return Err(Error::config(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        Ok(NodeId { value, width })
    }

    /// Parses a big-endian bit string such as `"0101"`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let width = u8::try_from(bits.len())
            .map_err(|_| Error::config(format!("bit string too long: {bits}")))?;
        let value = u64::from_str_radix(bits, 2)
            .map_err(|_| Error::config(format!("not a bit string: {bits}")))?;
        NodeId::new(value, width)
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> u8 {
        self.width
    }

    pub fn to_bit_string(self) -> String {
        format!("{:0width$b}", self.value, width = self.width as usize)
    }

    /// XOR distance without the width check. Callers inside a single
    /// simulation share one width by construction.
    #[inline]
    pub fn distance(self, other: NodeId) -> XorDistance {
        debug_assert_eq!(self.width, other.width);
        XorDistance(self.value ^ other.value)
    }

    /// Length of the common big-endian prefix.
    #[inline]
    pub fn common_prefix_len(self, other: NodeId) -> u8 {
        let x = self.value ^ other.value;
        if x == 0 {
            return self.width;
        }
        (x.leading_zeros() - (64 - self.width as u32)) as u8
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct XorDistance(pub u64);

impl XorDistance {
    pub fn value(self) -> u64 {
        self.0
    }
}

pub fn xor_distance(a: NodeId, b: NodeId) -> Result<XorDistance> {
    if a.width != b.width {
        return Err(Error::WidthMismatch {
            left: a.width,
            right: b.width,
        });
    }
    Ok(XorDistance(a.value ^ b.value))
}

/// 1-based bucket index of `other` in `owner`'s routing table.
pub fn bucket_index(owner: NodeId, other: NodeId) -> Result<usize> {
    if owner.width != other.width {
        return Err(Error::WidthMismatch {
            left: owner.width,
            right: other.width,
        });
    }
    if owner == other {
        return Err(Error::SelfBucket(owner));
    }
    Ok(bucket_index_unchecked(owner, other))
}

#[inline]
pub(crate) fn bucket_index_unchecked(owner: NodeId, other: NodeId) -> usize {
    owner.common_prefix_len(other) as usize + 1
}

/// The `count` candidates closest to `target`, ascending by distance and
/// then by numeric ID.
pub fn closest(target: Key, candidates: &[NodeId], count: usize) -> Result<Vec<NodeId>> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if let Some(bad) = candidates.iter().find(|c| c.width != target.width) {
        return Err(Error::WidthMismatch {
            left: target.width,
            right: bad.width,
        });
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by_key(|c| (c.distance(target), c.value));
    sorted.truncate(count);
    Ok(sorted)
}

/// Draws `count` distinct IDs uniformly from the `width`-bit space.
pub fn sample_unique_ids<R: Rng + ?Sized>(
    width: u8,
    count: usize,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::config(format!(
            "identifier width must be in 1..={MAX_WIDTH}, got {width}"
        )));
    }
    let space = 1u64 << width;
    if count as u64 > space {
        return Err(Error::config(format!(
            "{count} nodes do not fit in a {width}-bit identifier space"
        )));
    }
    // Floyd's algorithm keeps memory proportional to `count` for wide spaces.
    let mut chosen = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    for j in (space - count as u64)..space {
        let t = rng.random_range(0..=j);
        let pick = if chosen.contains(&t) { j } else { t };
        chosen.insert(pick);
        out.push(NodeId { value: pick, width });
    }
    // Floyd's order is biased toward high values late; shuffle to decouple
    // node index from ID.
    use rand::seq::SliceRandom;
    out.shuffle(rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn id(bits: &str) -> NodeId {
        NodeId::from_bits(bits).unwrap()
    }

    #[test]
    fn xor_distance_examples() {
        assert_eq!(xor_distance(id("0101"), id("0101")).unwrap().0, 0);
        assert_eq!(xor_distance(id("0101"), id("0011")).unwrap().0, 6);
        assert_eq!(xor_distance(id("0000"), id("1000")).unwrap().0, 8);
    }

    #[test]
    fn xor_distance_rejects_width_mismatch() {
        let err = xor_distance(id("0101"), id("00101")).unwrap_err();
        assert!(matches!(err, Error::WidthMismatch { left: 4, right: 5 }));
    }

    #[test]
    fn bucket_index_examples() {
        assert_eq!(bucket_index(id("1010"), id("0110")).unwrap(), 1);
        assert_eq!(bucket_index(id("1010"), id("1011")).unwrap(), 4);
        assert_eq!(bucket_index(id("0101"), id("0100")).unwrap(), 4);
        assert!(matches!(
            bucket_index(id("0101"), id("0101")),
            Err(Error::SelfBucket(_))
        ));
    }

    #[test]
    fn closest_examples() {
        let got = closest(id("0101"), &[id("0101"), id("0111"), id("1101")], 1).unwrap();
        assert_eq!(got, vec![id("0101")]);
        let got = closest(id("0101"), &[id("0111"), id("1100")], 2).unwrap();
        assert_eq!(got, vec![id("0111"), id("1100")]);
        let got = closest(id("0000"), &[id("0001"), id("0010"), id("0100")], 2).unwrap();
        assert_eq!(got, vec![id("0001"), id("0010")]);
        assert!(matches!(
            closest(id("0000"), &[], 1),
            Err(Error::NoCandidates)
        ));
    }

    #[test]
    fn sampled_ids_are_unique_and_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids = sample_unique_ids(12, 4096, &mut rng).unwrap();
        let set: std::collections::HashSet<_> = ids.iter().map(|i| i.value()).collect();
        assert_eq!(set.len(), 4096);
        assert!(sample_unique_ids(4, 17, &mut rng).is_err());
    }

    fn arb_id(width: u8) -> impl Strategy<Value = NodeId> {
        (0u64..(1u64 << width)).prop_map(move |v| NodeId::new(v, width).unwrap())
    }

    proptest! {
        #[test]
        fn xor_is_a_metric(a in arb_id(16), b in arb_id(16), c in arb_id(16)) {
            let d = |x: NodeId, y: NodeId| xor_distance(x, y).unwrap().0;
            prop_assert_eq!(d(a, a), 0);
            prop_assert_eq!(d(a, b) == 0, a == b);
            prop_assert_eq!(d(a, b), d(b, a));
            prop_assert!(d(a, c) <= d(a, b) + d(b, c));
        }

        #[test]
        fn distance_is_unidirectional(target in arb_id(12), dist in 0u64..4096) {
            // Exactly one ID lies at each distance from a target.
            let found: Vec<u64> = (0u64..4096)
                .filter(|v| v ^ target.value() == dist)
                .collect();
            prop_assert_eq!(found.len(), 1);
        }

        #[test]
        fn equal_bucket_implies_shared_prefix(owner in arb_id(16), a in arb_id(16), b in arb_id(16)) {
            prop_assume!(a != owner && b != owner);
            let ia = bucket_index(owner, a).unwrap();
            let ib = bucket_index(owner, b).unwrap();
            if ia == ib {
                let shift = 16 - (ia as u32 - 1);
                let prefix = |x: NodeId| if shift >= 64 { 0 } else { x.value() >> shift };
                prop_assert_eq!(prefix(a), prefix(owner));
                prop_assert_eq!(prefix(b), prefix(owner));
                // and both differ from the owner at bit `ia`
                let bit = 1u64 << (16 - ia as u32);
                prop_assert!((a.value() ^ owner.value()) & bit != 0);
                prop_assert!((b.value() ^ owner.value()) & bit != 0);
            }
        }

        #[test]
        fn target_bucket_peers_are_closer(owner in arb_id(16), key in arb_id(16), peer in arb_id(16)) {
            prop_assume!(owner != key && peer != owner);
            let target_bucket = bucket_index(owner, key).unwrap();
            if bucket_index(owner, peer).unwrap() == target_bucket {
                prop_assert!(peer.distance(key) < owner.distance(key));
            }
        }

        #[test]
        fn bucket_index_matches_log_formula(a in arb_id(16), b in arb_id(16)) {
            prop_assume!(a != b);
            let d = xor_distance(a, b).unwrap().0;
            let floor_log2 = 63 - d.leading_zeros() as usize;
            prop_assert_eq!(bucket_index(a, b).unwrap(), 16 - floor_log2);
        }
    }
}
