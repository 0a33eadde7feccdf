//! Node layouts: the full binary tree of sign words, or the recombining
//! lattice indexed by `(depth, #up)` for path-independent payoffs.

use crate::error::{Error, Result};
use crate::market::PathNode;

/// Largest step count for which the full `2^n` tree is materialized.
pub const MAX_FULL_DEPTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lattice {
    /// Every sign word is its own node; index = packed bits.
    Full,
    /// Nodes with equal `(depth, #up)` are merged; index = `#up`.
    Recombined,
}

impl Lattice {
    pub fn check(self, n: usize) -> Result<()> {
        match self {
            Lattice::Full if n > MAX_FULL_DEPTH => Err(Error::TooManySteps {
                n,
                max: MAX_FULL_DEPTH,
            }),
            _ => Ok(()),
        }
    }

    /// Number of nodes at depth `k`.
    pub fn width(self, k: usize) -> usize {
        match self {
            Lattice::Full => 1usize << k,
            Lattice::Recombined => k + 1,
        }
    }

    /// Index at depth `k + 1` of the up-child of node `id` at depth `k`.
    #[inline]
    pub fn up(self, k: usize, id: usize) -> usize {
        match self {
            Lattice::Full => id | (1 << k),
            Lattice::Recombined => id + 1,
        }
    }

    #[inline]
    pub fn down(self, _k: usize, id: usize) -> usize {
        id
    }

    #[inline]
    pub fn index(self, node: &PathNode) -> usize {
        match self {
            Lattice::Full => node.bits() as usize,
            Lattice::Recombined => node.ups(),
        }
    }

    /// A sign word mapping to `(k, id)`. For the recombining lattice the up
    /// moves come first.
    pub fn representative(self, k: usize, id: usize) -> PathNode {
        match self {
            Lattice::Full => PathNode::from_bits(k, id as u64),
            Lattice::Recombined => {
                let bits = if id == 0 { 0 } else { (1u64 << id) - 1 };
                PathNode::from_bits(k, bits)
            }
        }
    }

    /// Total node count over depths `0..=n`.
    pub fn total_nodes(self, n: usize) -> usize {
        (0..=n).map(|k| self.width(k)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Sign;

    #[test]
    fn children_match_path_encoding() {
        for lattice in [Lattice::Full, Lattice::Recombined] {
            for k in 0..6 {
                for id in 0..lattice.width(k) {
                    let node = lattice.representative(k, id);
                    assert_eq!(lattice.index(&node), id);
                    assert_eq!(lattice.index(&node.child(Sign::Up)), lattice.up(k, id));
                    assert_eq!(lattice.index(&node.child(Sign::Down)), lattice.down(k, id));
                }
            }
        }
    }

    #[test]
    fn full_tree_limit() {
        assert!(Lattice::Full.check(MAX_FULL_DEPTH).is_ok());
        assert!(Lattice::Full.check(MAX_FULL_DEPTH + 1).is_err());
        assert!(Lattice::Recombined.check(10_000).is_ok());
        assert_eq!(Lattice::Full.total_nodes(3), 15);
        assert_eq!(Lattice::Recombined.total_nodes(3), 10);
    }
}
