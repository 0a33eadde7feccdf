//! Forward replay of a hedge along sign paths, and exact expected shortfall
//! by enumeration of the full tree.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::market::{CrrModel, PathNode, Sign};
use crate::payoff::DiscretePayoffs;
use crate::risk::PolicyTable;
use crate::tree::{forward, step};

/// State of the hedge at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgeStep {
    pub k: usize,
    /// Discounted wealth `Ṽ_k`.
    pub wealth: f64,
    /// Discounted stock price `S̃_k`.
    pub stock: f64,
    /// Stock-value exposure held over `(k, k+1]`; zero at maturity.
    pub exposure: f64,
    /// Stock units held over `(k, k+1]`.
    pub gamma: f64,
    /// Bond units held over `(k, k+1]`.
    pub beta: f64,
    pub seller_stop: bool,
    pub buyer_stop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HedgeTrajectory {
    pub steps: Vec<HedgeStep>,
    /// Seller's cancellation date (`n` if never).
    pub sigma: usize,
    /// Buyer's best-response exercise date, if before `sigma`.
    pub tau: Option<usize>,
    /// Discounted shortfall `(Q − Ṽ)^+` for `(sigma, tau)`.
    pub shortfall: f64,
    /// Shortfall for the caller-supplied buyer date, when given.
    pub caller_shortfall: Option<f64>,
}

/// Discounted payoff for seller date `sigma` and buyer date `tau`, with the
/// buyer's payoff when both coincide.
fn settle(payoffs: &DiscretePayoffs, ids: &[usize], sigma: usize, tau: usize) -> (usize, f64) {
    if tau <= sigma {
        (tau, payoffs.f(tau, ids[tau]))
    } else {
        (sigma, payoffs.g(sigma, ids[sigma]))
    }
}

/// Replays `policy` from capital `x` along `signs`.
///
/// The seller cancels at the first date whose wealth lies in the seller stop
/// region; the buyer exercises at the first earlier date in the buyer stop
/// region, and otherwise receives the cancellation payment.
pub fn replay(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    signs: &[Sign],
    buyer_time: Option<usize>,
) -> Result<HedgeTrajectory> {
    let n = model.n();
    if policy.n() != n || payoffs.n() != n {
        return Err(Error::StepMismatch {
            policy: policy.n(),
            requested: n,
        });
    }
    if signs.len() != n {
        return Err(Error::PathLength {
            got: signs.len(),
            expected: n,
        });
    }
    if let Some(t) = buyer_time {
        if t > n {
            return Err(Error::InvalidNode { depth: t, n });
        }
    }
    let lattice = payoffs.lattice();
    lattice.check(n)?;
    let b0 = model.params().b0;
    let mut id = 0usize;
    let mut net = 0i64;
    let mut y = x;
    let mut wealth = Vec::with_capacity(n + 1);
    let mut ids = Vec::with_capacity(n + 1);
    let mut steps = Vec::with_capacity(n + 1);
    let mut sigma = None;
    let mut tau = None;
    for k in 0..=n {
        ids.push(id);
        wealth.push(y);
        let stock = model.discounted_from_net(net);
        let u = policy.exposure(k, id, y);
        let gamma = u / stock;
        let seller_stop = policy.seller_stops(k, id, y);
        let buyer_stop = policy.buyer_stops(k, id, y);
        if sigma.is_none() && seller_stop {
            sigma = Some(k);
        }
        if sigma.is_none() && tau.is_none() && buyer_stop {
            tau = Some(k);
        }
        steps.push(HedgeStep {
            k,
            wealth: y,
            stock,
            exposure: u,
            gamma,
            beta: (y - gamma * stock) / b0,
            seller_stop,
            buyer_stop,
        });
        if let Some(&sign) = signs.get(k) {
            let (up, down) = step(model, k, y, u)?;
            (y, id, net) = match sign {
                Sign::Up => (up, lattice.up(k, id), net + 1),
                Sign::Down => (down, lattice.down(k, id), net - 1),
            };
        }
    }
    let sigma = sigma.unwrap_or(n);
    let (at, q) = settle(payoffs, &ids, sigma, tau.unwrap_or(n));
    let shortfall = (q - wealth[at]).max(0.0);
    let caller_shortfall = buyer_time.map(|t| {
        let (at, q) = settle(payoffs, &ids, sigma, t);
        (q - wealth[at]).max(0.0)
    });
    Ok(HedgeTrajectory {
        steps,
        sigma,
        tau,
        shortfall,
        caller_shortfall,
    })
}

/// Probability of a sign path under the objective measure.
pub fn path_probability(model: &CrrModel, node: &PathNode) -> f64 {
    let p = model.p_obj();
    let ups = node.ups() as i32;
    let downs = node.depth() as i32 - ups;
    libm::pow(p, ups as f64) * libm::pow(1.0 - p, downs as f64)
}

/// Expected shortfall of `policy` from capital `x` against a buyer who best
/// responds to the policy's cancellation rule, by exact enumeration of the
/// full tree.
///
/// The buyer's value is computed backward over the realized tree with the
/// seller's date fixed by the policy.
pub fn shortfall_expectation(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
) -> Result<f64> {
    let n = model.n();
    if policy.n() != n || payoffs.n() != n {
        return Err(Error::StepMismatch {
            policy: policy.n(),
            requested: n,
        });
    }
    let tree = forward(model, x, policy)?;
    let lattice = payoffs.lattice();
    let id_of = |k: usize, bits: usize| lattice.index(&PathNode::from_bits(k, bits as u64));

    // Whether the seller has cancelled at or before each node.
    let mut stopped: Vec<Vec<bool>> = Vec::with_capacity(n + 1);
    stopped.push(alloc::vec![policy.seller_stops(0, 0, x)]);
    for k in 1..=n {
        let prev = &stopped[k - 1];
        let level = (0..1usize << k)
            .map(|bits| {
                let parent = bits & ((1 << (k - 1)) - 1);
                prev[parent] || policy.seller_stops(k, id_of(k, bits), tree.wealth[k][bits])
            })
            .collect();
        stopped.push(level);
    }
    let stops_here = |k: usize, bits: usize| {
        stopped[k][bits] && (k == 0 || !stopped[k - 1][bits & ((1 << (k - 1)) - 1)])
    };

    let p = model.p_obj();
    let mut next: Vec<f64> = (0..1usize << n)
        .map(|bits| {
            let v = tree.wealth[n][bits];
            (payoffs.f(n, id_of(n, bits)) - v).max(0.0)
        })
        .collect();
    for k in (0..n).rev() {
        let cur = (0..1usize << k)
            .map(|bits| {
                let v = tree.wealth[k][bits];
                let id = id_of(k, bits);
                if stops_here(k, bits) {
                    (payoffs.g(k, id) - v).max(0.0)
                } else {
                    let cont = p * next[Lattice::Full.up(k, bits)] + (1.0 - p) * next[Lattice::Full.down(k, bits)];
                    (payoffs.f(k, id) - v).max(0.0).max(cont)
                }
            })
            .collect();
        next = cur;
    }
    Ok(next[0])
}

/// Expected realized shortfall of [`replay`] over all `2^n` paths, weighted
/// by objective probabilities.
pub fn replay_expectation(model: &CrrModel, payoffs: &DiscretePayoffs, policy: &PolicyTable, x: f64) -> Result<f64> {
    let n = model.n();
    Lattice::Full.check(n)?;
    let mut total = 0.0;
    for bits in 0..1u64 << n {
        let node = PathNode::from_bits(n, bits);
        let signs: Vec<Sign> = node.signs().collect();
        let t = replay(model, payoffs, policy, x, &signs, None)?;
        total += path_probability(model, &node) * t.shortfall;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;
    use crate::payoff::{discretize, Builtin};
    use crate::risk::{solve, Style};

    fn model(n: usize) -> CrrModel {
        CrrModel::new(MarketParams::new(0.0, 0.2, 0.02, 1.0, 100.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn constant_payoff_bond_hedge() {
        let m = model(4);
        let d = discretize(&Builtin::Constant { level: 2.0, penalty: 1.0 }, &m, Lattice::Recombined).unwrap();
        let s = solve(&m, &d, Style::Game, false).unwrap();
        for bits in 0..16u64 {
            let signs: Vec<Sign> = PathNode::from_bits(4, bits).signs().collect();
            let t = replay(&m, &d, s.policy(), 2.0, &signs, Some(2)).unwrap();
            assert_eq!(t.shortfall, 0.0);
            assert_eq!(t.caller_shortfall, Some(0.0));
        }
    }

    #[test]
    fn self_financing_and_admissible() {
        let m = model(6);
        let d = discretize(&Builtin::GamePut { strike: 100.0, penalty: 2.0 }, &m, Lattice::Recombined).unwrap();
        let s = solve(&m, &d, Style::Game, false).unwrap();
        for bits in 0..64u64 {
            let signs: Vec<Sign> = PathNode::from_bits(6, bits).signs().collect();
            let t = replay(&m, &d, s.policy(), 1.5, &signs, None).unwrap();
            for (k, w) in t.steps.windows(2).enumerate() {
                assert!(w[1].wealth >= 0.0);
                let ret = libm::expm1(m.params().kappa * m.sqrt_dt() * signs[k].value());
                assert!((w[1].wealth - w[0].wealth - w[0].exposure * ret).abs() < 1e-12);
                // units reproduce the portfolio value
                let b0 = m.params().b0;
                assert!((w[0].gamma * w[0].stock + w[0].beta * b0 - w[0].wealth).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_matches_root_value() {
        for n in 1..=6 {
            let m = model(n);
            let d = discretize(&Builtin::GamePut { strike: 100.0, penalty: 2.0 }, &m, Lattice::Recombined).unwrap();
            let s = solve(&m, &d, Style::Game, false).unwrap();
            for x in [0.0, 0.8, 2.0, 3.5] {
                let j = s.risk(x).unwrap();
                let e = shortfall_expectation(&m, &d, s.policy(), x).unwrap();
                let r = replay_expectation(&m, &d, s.policy(), x).unwrap();
                assert!((e - j).abs() < 1e-9, "n={n} x={x}: {e} vs {j}");
                assert!((r - j).abs() < 1e-9, "n={n} x={x}: {r} vs {j}");
            }
        }
    }

    #[test]
    fn path_length_is_checked() {
        let m = model(3);
        let d = discretize(&Builtin::GamePut { strike: 100.0, penalty: 2.0 }, &m, Lattice::Recombined).unwrap();
        let s = solve(&m, &d, Style::Game, false).unwrap();
        assert!(matches!(
            replay(&m, &d, s.policy(), 1.0, &[Sign::Up], None),
            Err(Error::PathLength { .. })
        ));
    }
}
