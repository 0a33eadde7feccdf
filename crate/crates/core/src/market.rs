//! Black–Scholes parameters and their n-step CRR approximation.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};

/// Parameters of the continuous market: bond `b0·e^{rt}` and stock
/// `S0·exp(rt + κB*_t)` with `B*_t = (μ/κ − κ/2)t + B_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub r: f64,
    pub kappa: f64,
    pub mu: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub s0: f64,
    pub b0: f64,
}

impl MarketParams {
    pub fn new(r: f64, kappa: f64, mu: f64, horizon: f64, s0: f64, b0: f64) -> Result<Self> {
        let params = MarketParams {
            r,
            kappa,
            mu,
            horizon,
            s0,
            b0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("r", self.r), ("mu", self.mu)] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        for (name, value) in [
            ("kappa", self.kappa),
            ("T", self.horizon),
            ("S0", self.s0),
            ("b0", self.b0),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Drift of `B*` under the objective measure, `μ/κ − κ/2`.
    pub fn bstar_drift(&self) -> f64 {
        self.mu / self.kappa - self.kappa / 2.0
    }
}

/// One step of the driving sign sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Up,
    Down,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Up => 1.0,
            Sign::Down => -1.0,
        }
    }

    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' | 'u' | 'U' | '1' => Some(Sign::Up),
            '-' | 'd' | 'D' | '0' => Some(Sign::Down),
            _ => None,
        }
    }
}

/// A node of the full binary tree: the first `depth` signs of a path, packed
/// so that bit `i` is set when the `(i+1)`-th sign is up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathNode {
    depth: usize,
    bits: u64,
}

impl PathNode {
    pub const ROOT: PathNode = PathNode { depth: 0, bits: 0 };

    /// Maximal depth representable by the packed encoding.
    pub const MAX_DEPTH: usize = 63;

    pub fn from_signs(signs: &[Sign]) -> PathNode {
        assert!(signs.len() <= Self::MAX_DEPTH, "sign word too long");
        let bits = signs
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Sign::Up)
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        PathNode {
            depth: signs.len(),
            bits,
        }
    }

    /// Node from its packed bits; bits at or above `depth` are dropped.
    pub fn from_bits(depth: usize, bits: u64) -> PathNode {
        assert!(depth <= Self::MAX_DEPTH, "depth too large");
        let mask = if depth == 64 { u64::MAX } else { (1u64 << depth) - 1 };
        PathNode {
            depth,
            bits: bits & mask,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn ups(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn sign(&self, i: usize) -> Sign {
        assert!(i < self.depth);
        if self.bits >> i & 1 == 1 {
            Sign::Up
        } else {
            Sign::Down
        }
    }

    pub fn signs(&self) -> impl Iterator<Item = Sign> + '_ {
        (0..self.depth).map(move |i| self.sign(i))
    }

    pub fn child(&self, sign: Sign) -> PathNode {
        assert!(self.depth < Self::MAX_DEPTH);
        let bits = match sign {
            Sign::Up => self.bits | (1 << self.depth),
            Sign::Down => self.bits,
        };
        PathNode {
            depth: self.depth + 1,
            bits,
        }
    }

    /// Sum of the signs, `#up − #down`.
    pub fn net(&self) -> i64 {
        2 * self.ups() as i64 - self.depth as i64
    }
}

/// The n-step CRR market approximating [`MarketParams`].
///
/// All derived constants come from closed forms; nothing is accumulated
/// iteratively.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrrModel {
    params: MarketParams,
    n: usize,
    dt: f64,
    sqrt_dt: f64,
    rn: f64,
    a1: f64,
    a2: f64,
    p_obj: f64,
    p_mart: f64,
}

impl CrrModel {
    pub fn new(params: MarketParams, n: usize) -> Result<Self> {
        params.validate()?;
        if n == 0 {
            return Err(Error::ZeroSteps);
        }
        let dt = params.horizon / n as f64;
        let sqrt_dt = sqrt(dt);
        let step = params.kappa * sqrt_dt;
        let rn = libm::expm1(params.r * dt);
        let a1 = libm::expm1(step);
        let a2 = libm::expm1(-step);
        let skew = (params.kappa - 2.0 * params.mu / params.kappa) * sqrt_dt;
        let p_obj = 1.0 / (exp(skew) + 1.0);
        let p_mart = 1.0 / (exp(step) + 1.0);
        if !(a1 > 0.0 && a2 < 0.0) {
            return Err(Error::InvalidReturns { a1, a2 });
        }
        if !(p_obj > 0.0 && p_obj < 1.0) {
            return Err(Error::InvalidProbability(p_obj));
        }
        Ok(CrrModel {
            params,
            n,
            dt,
            sqrt_dt,
            rn,
            a1,
            a2,
            p_obj,
            p_mart,
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Step length `T/n`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sqrt_dt(&self) -> f64 {
        self.sqrt_dt
    }

    /// Per-step interest `e^{rT/n} − 1`.
    pub fn rn(&self) -> f64 {
        self.rn
    }

    /// Discounted up return `e^{κ√(T/n)} − 1`.
    pub fn a1(&self) -> f64 {
        self.a1
    }

    /// Discounted down return `e^{−κ√(T/n)} − 1`.
    pub fn a2(&self) -> f64 {
        self.a2
    }

    /// Objective probability of an up step.
    pub fn p_obj(&self) -> f64 {
        self.p_obj
    }

    /// Martingale probability of an up step.
    pub fn p_mart(&self) -> f64 {
        self.p_mart
    }

    /// Ratio `−a2/a1`, which equals `e^{−κ√(T/n)}`.
    pub fn lambda(&self) -> f64 {
        -self.a2 / self.a1
    }

    pub fn step_return(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Up => self.a1,
            Sign::Down => self.a2,
        }
    }

    /// Admissible exposures `[−y/a1, −y/a2]` from discounted wealth `y`.
    pub fn exposure_interval(&self, wealth: f64) -> (f64, f64) {
        (-wealth / self.a1, -wealth / self.a2)
    }

    fn check_node(&self, node: &PathNode) -> Result<()> {
        if node.depth() > self.n {
            return Err(Error::InvalidNode {
                depth: node.depth(),
                n: self.n,
            });
        }
        Ok(())
    }

    /// Stock price `S0·exp(k·rT/n + κ√(T/n)·Σξ)` at the node.
    pub fn stock_price(&self, node: &PathNode) -> Result<f64> {
        self.check_node(node)?;
        Ok(self.price_from_net(node.depth(), node.net()))
    }

    pub(crate) fn price_from_net(&self, k: usize, net: i64) -> f64 {
        let p = &self.params;
        p.s0 * exp(k as f64 * p.r * self.dt + p.kappa * self.sqrt_dt * net as f64)
    }

    /// Discounted stock price `S0·exp(κ√(T/n)·Σξ)`.
    pub fn discounted_stock(&self, node: &PathNode) -> Result<f64> {
        self.check_node(node)?;
        Ok(self.discounted_from_net(node.net()))
    }

    pub(crate) fn discounted_from_net(&self, net: i64) -> f64 {
        self.params.s0 * exp(self.params.kappa * self.sqrt_dt * net as f64)
    }

    /// `(1 + r_n)^{−k} = e^{−rkT/n}`.
    pub fn discount_factor(&self, k: usize) -> Result<f64> {
        if k > self.n {
            return Err(Error::InvalidNode { depth: k, n: self.n });
        }
        Ok(exp(-self.params.r * k as f64 * self.dt))
    }

    /// Step-path sample values `S0, S_1, …, S_k` along the node's signs.
    pub fn step_path(&self, node: &PathNode) -> Vec<f64> {
        let mut net = 0i64;
        let mut out = Vec::with_capacity(node.depth() + 1);
        out.push(self.params.s0);
        for (j, s) in node.signs().enumerate() {
            net += if s == Sign::Up { 1 } else { -1 };
            out.push(self.price_from_net(j + 1, net));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(r: f64, kappa: f64, mu: f64) -> MarketParams {
        MarketParams::new(r, kappa, mu, 1.0, 100.0, 1.0).unwrap()
    }

    #[test]
    fn symmetric_drift_gives_half() {
        let m = CrrModel::new(params(0.0, 0.2, 0.02), 4).unwrap();
        assert_eq!(m.p_obj(), 0.5);
        assert_eq!(m.rn(), 0.0);
    }

    #[test]
    fn zero_rate_has_zero_step_interest() {
        for n in [1, 3, 17] {
            for kappa in [0.05, 0.4] {
                let m = CrrModel::new(params(0.0, kappa, 0.1), n).unwrap();
                assert_eq!(m.rn(), 0.0);
                assert_eq!(m.discount_factor(n).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn closed_forms_match_extended_precision() {
        // mpmath, 50 digits: r=0.05, κ=0.3, μ=0.1, T=1, n=16.
        let m = CrrModel::new(params(0.05, 0.3, 0.1), 16).unwrap();
        assert_relative_eq!(m.rn(), 0.0031298879027391486, max_relative = 1e-14);
        assert_relative_eq!(m.a1(), 0.077_884_150_884_631_54, max_relative = 1e-14);
        assert_relative_eq!(m.a2(), -0.072_256_513_671_447_1, max_relative = 1e-14);
        assert_relative_eq!(m.p_obj(), 0.522_900_633_167_674_2, max_relative = 1e-14);
        assert_relative_eq!(m.p_mart(), 0.481_258_784_121_464_8, max_relative = 1e-14);
    }

    #[test]
    fn martingale_identity() {
        for (r, kappa, mu) in [(0.0, 0.2, 0.02), (0.05, 0.3, 0.1), (-0.01, 1.5, -0.3)] {
            for n in [1, 4, 64, 1000] {
                let m = CrrModel::new(params(r, kappa, mu), n).unwrap();
                let drift = m.p_mart() * m.a1() + (1.0 - m.p_mart()) * m.a2();
                assert!(drift.abs() < 1e-12, "{drift}");
                assert!(m.a1() > 0.0 && m.a2() < 0.0);
                assert!(m.p_obj() > 0.0 && m.p_obj() < 1.0);
            }
        }
    }

    #[test]
    fn scaling_trend() {
        let p = params(0.05, 0.3, 0.1);
        let mut last = f64::INFINITY;
        for n in [4, 16, 64, 256] {
            let m = CrrModel::new(p, n).unwrap();
            let gap = (m.p_obj() - 0.5).abs();
            assert!(gap < last);
            last = gap;
        }
    }

    #[test]
    fn stock_price_examples() {
        let m = CrrModel::new(params(0.05, 0.3, 0.1), 4).unwrap();
        assert_eq!(m.stock_price(&PathNode::ROOT).unwrap(), 100.0);

        let node = PathNode::from_signs(&[Sign::Up, Sign::Up, Sign::Down]);
        let expected = 100.0 * (3.0 * 0.0125f64 + 0.15 * 1.0).exp();
        assert_relative_eq!(m.stock_price(&node).unwrap(), expected, max_relative = 1e-14);

        // Same value from the product of one-step gross returns.
        let product = node.signs().fold(100.0, |s, sign| {
            s * ((0.05 * 0.25) + 0.3 * 0.5 * sign.value()).exp()
        });
        assert_relative_eq!(m.stock_price(&node).unwrap(), product, max_relative = 1e-13);

        let flat = CrrModel::new(params(0.0, 0.3, 0.1), 4).unwrap();
        let balanced = PathNode::from_signs(&[Sign::Up, Sign::Down, Sign::Down, Sign::Up]);
        assert_relative_eq!(flat.stock_price(&balanced).unwrap(), 100.0, max_relative = 1e-15);
    }

    #[test]
    fn discount_factor_examples() {
        let m = CrrModel::new(params(0.05, 0.3, 0.1), 10).unwrap();
        assert_eq!(m.discount_factor(0).unwrap(), 1.0);
        assert_relative_eq!(m.discount_factor(10).unwrap(), (-0.05f64).exp(), max_relative = 1e-15);
        let compounded = (1.0 + m.rn()).powi(-10);
        assert_relative_eq!(m.discount_factor(10).unwrap(), compounded, max_relative = 1e-13);
        assert!(m.discount_factor(11).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(MarketParams::new(0.0, 0.0, 0.0, 1.0, 100.0, 1.0).is_err());
        assert!(MarketParams::new(0.0, 0.2, 0.0, -1.0, 100.0, 1.0).is_err());
        assert!(MarketParams::new(0.0, 0.2, 0.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(MarketParams::new(f64::INFINITY, 0.2, 0.0, 1.0, 100.0, 1.0).is_err());
        assert!(MarketParams::new(0.0, 0.2, 0.0, 1.0, 100.0, 0.0).is_err());
        assert_eq!(
            CrrModel::new(params(0.0, 0.2, 0.0), 0).unwrap_err(),
            Error::ZeroSteps
        );
    }

    #[test]
    fn path_node_encoding() {
        let signs = [Sign::Up, Sign::Down, Sign::Up, Sign::Up];
        let node = PathNode::from_signs(&signs);
        assert_eq!(node.depth(), 4);
        assert_eq!(node.ups(), 3);
        assert_eq!(node.net(), 2);
        assert!(node.signs().eq(signs.iter().copied()));
        let grown = PathNode::ROOT
            .child(Sign::Up)
            .child(Sign::Down)
            .child(Sign::Up)
            .child(Sign::Up);
        assert_eq!(grown, node);
    }
}
