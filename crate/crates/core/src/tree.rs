//! Forward wealth propagation over the full tree of sign words.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::market::{CrrModel, PathNode};

/// A hedging rule: the stock-value exposure held over the next step, given
/// the current node and discounted wealth.
pub trait Strategy {
    fn exposure(&self, node: &PathNode, wealth: f64) -> f64;
}

impl<F: Fn(&PathNode, f64) -> f64> Strategy for F {
    fn exposure(&self, node: &PathNode, wealth: f64) -> f64 {
        self(node, wealth)
    }
}

/// Discounted wealth at every node of the full tree, indexed `[depth][bits]`.
pub(crate) struct WealthTree {
    pub wealth: Vec<Vec<f64>>,
}

/// Checks `u ∈ [−y/a1, −y/a2]` up to rounding and returns the two successor
/// wealths `(up, down)`.
pub(crate) fn step(model: &CrrModel, depth: usize, y: f64, u: f64) -> Result<(f64, f64)> {
    let (lo, hi) = model.exposure_interval(y);
    let slack = 1e-12 * (1.0 + u.abs() + lo.abs());
    if !(u >= lo - slack && u <= hi + slack) {
        return Err(Error::Inadmissible {
            depth,
            wealth: y,
            exposure: u,
            lo,
            hi,
        });
    }
    Ok((
        (y + u * model.a1()).max(0.0),
        (y + u * model.a2()).max(0.0),
    ))
}

pub(crate) fn forward(model: &CrrModel, x: f64, strategy: &dyn Strategy) -> Result<WealthTree> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::NegativeWealth(x));
    }
    let n = model.n();
    Lattice::Full.check(n)?;
    let mut wealth = Vec::with_capacity(n + 1);
    wealth.push(alloc::vec![x]);
    for k in 0..n {
        let cur = &wealth[k];
        let mut next = alloc::vec![0.0; cur.len() * 2];
        for (id, &y) in cur.iter().enumerate() {
            let node = PathNode::from_bits(k, id as u64);
            let u = strategy.exposure(&node, y);
            let (up, down) = step(model, k, y, u)?;
            next[Lattice::Full.up(k, id)] = up;
            next[Lattice::Full.down(k, id)] = down;
        }
        wealth.push(next);
    }
    Ok(WealthTree { wealth })
}
