//! Backward recursions: shortfall value functions with their optimal hedges
//! and stopping regions, hedge evaluation, and the discrete Dynkin price.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::market::{CrrModel, PathNode};
use crate::payoff::DiscretePayoffs;
use crate::pwl::{bellman_compose, policy_exposure, AffinePolicyPiece, PwlFn};
use crate::tree::forward;
pub use crate::tree::Strategy;

/// Stopping regions treat values within this (relative) distance as equal.
const REGION_TOL_REL: f64 = 1e-11;

/// Game options let the seller cancel; American options do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Style {
    Game,
    American,
}

impl Style {
    pub fn as_str(self) -> &'static str {
        match self {
            Style::Game => "game",
            Style::American => "american",
        }
    }
}

/// Value functions `J_k(·)` at every node, indexed `[depth][lattice id]`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    lattice: Lattice,
    levels: Vec<Vec<PwlFn>>,
}

impl ValueTable {
    pub fn n(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn get(&self, k: usize, id: usize) -> &PwlFn {
        &self.levels[k][id]
    }

    pub fn at_node(&self, node: &PathNode) -> &PwlFn {
        &self.levels[node.depth()][self.lattice.index(node)]
    }

    pub fn level(&self, k: usize) -> &[PwlFn] {
        &self.levels[k]
    }

    pub fn root(&self) -> &PwlFn {
        &self.levels[0][0]
    }
}

/// Optimal exposure rule and stopping regions at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePolicy {
    /// Affine pieces of the exposure rule, tiling `[0, ∞)`.
    pub pieces: Vec<AffinePolicyPiece>,
    /// Wealth intervals where the seller cancels (empty for American).
    pub seller_stop: Vec<(f64, f64)>,
    /// Wealth intervals where exercising is a best response of the buyer.
    pub buyer_stop: Vec<(f64, f64)>,
}

fn contains(intervals: &[(f64, f64)], y: f64) -> bool {
    intervals.iter().any(|&(lo, hi)| lo <= y && y <= hi)
}

/// Per-node policy for depths `0..n`.
#[derive(Debug, Clone)]
pub struct PolicyTable {
    n: usize,
    lattice: Lattice,
    style: Style,
    a1: f64,
    a2: f64,
    nodes: Vec<Vec<NodePolicy>>,
}

impl PolicyTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn style(&self) -> Style {
        self.style
    }

    pub fn node(&self, k: usize, id: usize) -> &NodePolicy {
        &self.nodes[k][id]
    }

    pub fn level(&self, k: usize) -> &[NodePolicy] {
        &self.nodes[k]
    }

    /// Exposure at lattice node `(k, id)` and wealth `y`; zero at maturity.
    pub fn exposure(&self, k: usize, id: usize, y: f64) -> f64 {
        if k >= self.n {
            return 0.0;
        }
        policy_exposure(&self.nodes[k][id].pieces, y, self.a1, self.a2)
    }

    /// Whether the seller cancels at `(k, id)` with wealth `y`. Never at
    /// maturity, where cancelling and exercise pay the same.
    pub fn seller_stops(&self, k: usize, id: usize, y: f64) -> bool {
        self.style == Style::Game && k < self.n && contains(&self.nodes[k][id].seller_stop, y)
    }

    /// Whether the buyer exercises at `(k, id)` with wealth `y`.
    pub fn buyer_stops(&self, k: usize, id: usize, y: f64) -> bool {
        k >= self.n || contains(&self.nodes[k][id].buyer_stop, y)
    }

    /// Total number of affine pieces across all nodes.
    pub fn piece_count(&self) -> usize {
        self.nodes.iter().flatten().map(|p| p.pieces.len()).sum()
    }
}

impl Strategy for PolicyTable {
    fn exposure(&self, node: &PathNode, wealth: f64) -> f64 {
        PolicyTable::exposure(self, node.depth(), self.lattice.index(node), wealth)
    }
}

/// Breakpoint statistics for one depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LevelStats {
    pub total: usize,
    pub max: usize,
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    root: PwlFn,
    values: Option<ValueTable>,
    policy: PolicyTable,
    breakpoints: Vec<LevelStats>,
}

impl Solution {
    /// `J_0(·)`.
    pub fn root(&self) -> &PwlFn {
        &self.root
    }

    /// Full value tables, when requested.
    pub fn values(&self) -> Option<&ValueTable> {
        self.values.as_ref()
    }

    pub fn policy(&self) -> &PolicyTable {
        &self.policy
    }

    pub fn into_policy(self) -> PolicyTable {
        self.policy
    }

    /// Breakpoint counts of the value functions, by depth.
    pub fn breakpoints(&self) -> &[LevelStats] {
        &self.breakpoints
    }

    /// Minimal shortfall risk with initial capital `x`.
    pub fn risk(&self, x: f64) -> Result<f64> {
        shortfall_risk(&self.root, x)
    }
}

/// Summary of one risk computation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub x: f64,
    pub risk: f64,
    pub price: f64,
    pub n: usize,
    pub payoff: String,
    pub style: Style,
    /// Largest breakpoint count per depth.
    pub breakpoints: Vec<usize>,
    /// Wealth intervals at the root where the seller cancels immediately.
    pub root_seller_stop: Vec<(f64, f64)>,
}

impl RiskReport {
    pub fn new(model: &CrrModel, payoffs: &DiscretePayoffs, style: Style, x: f64) -> Result<RiskReport> {
        let solution = solve(model, payoffs, style, false)?;
        let price = price(model, payoffs, style)?;
        Ok(RiskReport {
            x,
            risk: solution.risk(x)?,
            price,
            n: model.n(),
            payoff: String::from(payoffs.name()),
            style,
            breakpoints: solution.breakpoints.iter().map(|s| s.max).collect(),
            root_seller_stop: solution.policy.node(0, 0).seller_stop.clone(),
        })
    }
}

fn check_steps(model: &CrrModel, payoffs: &DiscretePayoffs) -> Result<()> {
    if payoffs.n() != model.n() {
        return Err(Error::StepMismatch {
            policy: payoffs.n(),
            requested: model.n(),
        });
    }
    Ok(())
}

/// One node of the recursion: the value function and its policy from the
/// two successor value functions.
pub fn solve_node(
    model: &CrrModel,
    style: Style,
    k: usize,
    f: f64,
    g: f64,
    up: &PwlFn,
    down: &PwlFn,
) -> Result<(PwlFn, NodePolicy)> {
    let (psi, pieces) = bellman_compose(up, down, model.p_obj(), model.a1(), model.a2()).map_err(|e| match e {
        Error::InfeasiblePolicy { lo, hi, .. } => Error::InfeasiblePolicy { depth: k, lo, hi },
        e => e,
    })?;
    let hf = PwlFn::hinge(f)?;
    let inner = hf.max(&psi);
    let (value, seller_stop) = match style {
        Style::Game => {
            let hg = PwlFn::hinge(g)?;
            let tol = REGION_TOL_REL * inner.at(0.0).max(1.0);
            let region = hg.region_le(&inner, tol);
            (hg.min(&inner), region)
        }
        Style::American => (inner, Vec::new()),
    };
    value.check_invariants()?;
    let buyer_stop = value.region_le(&hf, REGION_TOL_REL * value.at(0.0).max(f).max(1.0));
    Ok((
        value,
        NodePolicy {
            pieces,
            seller_stop,
            buyer_stop,
        },
    ))
}

/// Runs the backward recursion on value functions of wealth.
///
/// With `keep_values` the value function of every node is retained;
/// otherwise only two levels are alive at a time.
pub fn solve(model: &CrrModel, payoffs: &DiscretePayoffs, style: Style, keep_values: bool) -> Result<Solution> {
    check_steps(model, payoffs)?;
    let n = model.n();
    let lattice = payoffs.lattice();
    let mut next: Vec<PwlFn> = payoffs
        .f_level(n)
        .iter()
        .map(|&f| PwlFn::hinge(f))
        .collect::<Result<_>>()?;
    let mut breakpoints = alloc::vec![LevelStats::default(); n + 1];
    breakpoints[n] = stats(&next);
    let mut kept: Vec<Vec<PwlFn>> = Vec::new();
    let mut nodes: Vec<Vec<NodePolicy>> = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let width = lattice.width(k);
        let mut cur = Vec::with_capacity(width);
        let mut pol = Vec::with_capacity(width);
        for id in 0..width {
            let (value, policy) = solve_node(
                model,
                style,
                k,
                payoffs.f(k, id),
                payoffs.g(k, id),
                &next[lattice.up(k, id)],
                &next[lattice.down(k, id)],
            )?;
            cur.push(value);
            pol.push(policy);
        }
        breakpoints[k] = stats(&cur);
        let done = core::mem::replace(&mut next, cur);
        if keep_values {
            kept.push(done);
        }
        nodes.push(pol);
    }
    nodes.reverse();
    let root = next[0].clone();
    let values = if keep_values {
        kept.push(next);
        kept.reverse();
        Some(ValueTable {
            lattice,
            levels: kept,
        })
    } else {
        None
    };
    Ok(Solution {
        root,
        values,
        policy: PolicyTable {
            n,
            lattice,
            style,
            a1: model.a1(),
            a2: model.a2(),
            nodes,
        },
        breakpoints,
    })
}

fn stats(level: &[PwlFn]) -> LevelStats {
    LevelStats {
        total: level.iter().map(PwlFn::len).sum(),
        max: level.iter().map(PwlFn::len).max().unwrap_or(0),
    }
}

/// Value tables and policy of the game recursion.
pub fn game_value_table(model: &CrrModel, payoffs: &DiscretePayoffs) -> Result<(ValueTable, PolicyTable)> {
    let s = solve(model, payoffs, Style::Game, true)?;
    Ok((s.values.unwrap(), s.policy))
}

/// Value tables and policy of the American recursion.
pub fn american_value_table(model: &CrrModel, payoffs: &DiscretePayoffs) -> Result<(ValueTable, PolicyTable)> {
    let s = solve(model, payoffs, Style::American, true)?;
    Ok((s.values.unwrap(), s.policy))
}

/// `J_0(x)`.
pub fn shortfall_risk(root: &PwlFn, x: f64) -> Result<f64> {
    root.eval(x)
}

/// Discrete Dynkin value under the martingale measure (American: optimal
/// stopping value).
pub fn price(model: &CrrModel, payoffs: &DiscretePayoffs, style: Style) -> Result<f64> {
    check_steps(model, payoffs)?;
    let n = model.n();
    let lattice = payoffs.lattice();
    let p = model.p_mart();
    let mut next: Vec<f64> = payoffs.f_level(n).to_vec();
    for k in (0..n).rev() {
        let cur = (0..lattice.width(k))
            .map(|id| {
                let cont = p * next[lattice.up(k, id)] + (1.0 - p) * next[lattice.down(k, id)];
                let v = payoffs.f(k, id).max(cont);
                match style {
                    Style::Game => v.min(payoffs.g(k, id)),
                    Style::American => v,
                }
            })
            .collect();
        next = cur;
    }
    Ok(next[0])
}

pub fn game_price(model: &CrrModel, payoffs: &DiscretePayoffs) -> Result<f64> {
    price(model, payoffs, Style::Game)
}

pub fn american_price(model: &CrrModel, payoffs: &DiscretePayoffs) -> Result<f64> {
    price(model, payoffs, Style::American)
}

/// Risk `W_0` of an arbitrary strategy: wealth is propagated forward over
/// the full tree, then the min–max stopping recursion runs backward under the
/// objective measure.
pub fn evaluate_hedge(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    style: Style,
    strategy: &dyn Strategy,
    x: f64,
) -> Result<f64> {
    check_steps(model, payoffs)?;
    let n = model.n();
    let tree = forward(model, x, strategy)?;
    let lattice = payoffs.lattice();
    let p = model.p_obj();
    let id_of = |k: usize, bits: usize| lattice.index(&PathNode::from_bits(k, bits as u64));
    let mut next: Vec<f64> = tree.wealth[n]
        .iter()
        .enumerate()
        .map(|(bits, &v)| (payoffs.f(n, id_of(n, bits)) - v).max(0.0))
        .collect();
    for k in (0..n).rev() {
        let cur = tree.wealth[k]
            .iter()
            .enumerate()
            .map(|(bits, &v)| {
                let id = id_of(k, bits);
                let cont = p * next[Lattice::Full.up(k, bits)] + (1.0 - p) * next[Lattice::Full.down(k, bits)];
                let w = (payoffs.f(k, id) - v).max(0.0).max(cont);
                match style {
                    Style::Game => w.min((payoffs.g(k, id) - v).max(0.0)),
                    Style::American => w,
                }
            })
            .collect();
        next = cur;
    }
    Ok(next[0])
}
