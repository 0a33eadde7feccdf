//! Path-dependent payoff functionals and their discretization on the lattice.
//!
//! A payoff is a pair `(F, Δ)` of nonnegative functionals of the price path
//! restricted to `[0, t]`. The buyer exercising at `t` receives `F_t`; the
//! seller cancelling at `t` pays `G_t = F_t + Δ_t`.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::market::CrrModel;

/// Penalty multiple of the strike used to emulate an American option as a
/// game option: cancellation is never worth it.
pub const AMERICAN_PENALTY_FACTOR: f64 = 1e6;

/// A sampled price path read as a right-continuous step function: the value
/// on `[times[i], times[i+1])` is `values[i]`, and the last sample holds up to
/// the evaluation time.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    times: &'a [f64],
    values: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn new(times: &'a [f64], values: &'a [f64]) -> Self {
        assert_eq!(times.len(), values.len());
        assert!(!values.is_empty(), "empty path");
        PathView { times, values }
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// Value at the evaluation time.
    pub fn current(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn running_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn running_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Restriction to the first `len` samples.
    pub fn prefix(&self, len: usize) -> PathView<'a> {
        PathView {
            times: &self.times[..len],
            values: &self.values[..len],
        }
    }
}

/// A payoff pair `(F, Δ)`.
///
/// Implementations must be pure. `lipschitz` is the constant `L ≥ 1` for
/// which the functionals satisfy the uniform-metric and time-regularity
/// bounds; the crate only audits it on samples.
pub trait Payoff: Send + Sync {
    fn name(&self) -> &str;

    /// `F_t` of the path restricted to `[0, t]`.
    fn low(&self, t: f64, path: &PathView<'_>) -> f64;

    /// `Δ_t`, the cancellation penalty.
    fn penalty(&self, t: f64, path: &PathView<'_>) -> f64;

    /// `G_t = F_t + Δ_t`.
    fn high(&self, t: f64, path: &PathView<'_>) -> f64 {
        self.low(t, path) + self.penalty(t, path)
    }

    fn lipschitz(&self) -> f64;

    /// True when `F` and `Δ` depend on the path only through `(t, v_t)`.
    fn path_independent(&self) -> bool;
}

/// The fixture library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `F ≡ level`, `Δ ≡ penalty`.
    Constant { level: f64, penalty: f64 },
    /// `F = (K − v_t)^+`, `Δ ≡ penalty`.
    GamePut { strike: f64, penalty: f64 },
    /// `F = (K − v_t)^+` with a prohibitive cancellation penalty.
    AmericanPut { strike: f64 },
    /// `F = (K − min_{s≤t} v_s)^+`, `Δ ≡ penalty`.
    LookbackPut { strike: f64, penalty: f64 },
    /// `F = max_{s≤t} v_s − v_t`, `Δ ≡ penalty`.
    FloatingLookback { penalty: f64 },
}

/// Parameters accepted by [`Builtin::from_name`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BuiltinParams {
    pub strike: Option<f64>,
    pub penalty: Option<f64>,
    pub level: Option<f64>,
}

impl Builtin {
    pub const NAMES: [&'static str; 5] = [
        "constant",
        "game_put_const_penalty",
        "american_put",
        "lookback_put",
        "floating_lookback",
    ];

    pub fn from_name(name: &str, params: BuiltinParams) -> Result<Builtin> {
        let need = |value: Option<f64>, param: &'static str| -> Result<f64> {
            let v = value.ok_or_else(|| Error::MissingPayoffParameter {
                name: name.to_string(),
                param,
            })?;
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidPayoff {
                    name: name.to_string(),
                    depth: 0,
                    value: v,
                })
            }
        };
        let penalty = || need(Some(params.penalty.unwrap_or(0.0)), "penalty");
        Ok(match name {
            "constant" => Builtin::Constant {
                level: need(params.level, "level")?,
                penalty: penalty()?,
            },
            "game_put_const_penalty" => Builtin::GamePut {
                strike: need(params.strike, "strike")?,
                penalty: need(params.penalty, "penalty")?,
            },
            "american_put" => Builtin::AmericanPut {
                strike: need(params.strike, "strike")?,
            },
            "lookback_put" => Builtin::LookbackPut {
                strike: need(params.strike, "strike")?,
                penalty: penalty()?,
            },
            "floating_lookback" => Builtin::FloatingLookback {
                penalty: penalty()?,
            },
            other => return Err(Error::UnknownPayoff(other.to_string())),
        })
    }

    pub fn boxed(self) -> Box<dyn Payoff> {
        Box::new(self)
    }

    fn constant_penalty(&self) -> f64 {
        match *self {
            Builtin::Constant { penalty, .. }
            | Builtin::GamePut { penalty, .. }
            | Builtin::LookbackPut { penalty, .. }
            | Builtin::FloatingLookback { penalty } => penalty,
            Builtin::AmericanPut { strike } => AMERICAN_PENALTY_FACTOR * strike,
        }
    }
}

impl Payoff for Builtin {
    fn name(&self) -> &str {
        match self {
            Builtin::Constant { .. } => "constant",
            Builtin::GamePut { .. } => "game_put_const_penalty",
            Builtin::AmericanPut { .. } => "american_put",
            Builtin::LookbackPut { .. } => "lookback_put",
            Builtin::FloatingLookback { .. } => "floating_lookback",
        }
    }

    fn low(&self, _t: f64, path: &PathView<'_>) -> f64 {
        match *self {
            Builtin::Constant { level, .. } => level,
            Builtin::GamePut { strike, .. } | Builtin::AmericanPut { strike } => {
                (strike - path.current()).max(0.0)
            }
            Builtin::LookbackPut { strike, .. } => (strike - path.running_min()).max(0.0),
            Builtin::FloatingLookback { .. } => (path.running_max() - path.current()).max(0.0),
        }
    }

    fn penalty(&self, _t: f64, _path: &PathView<'_>) -> f64 {
        self.constant_penalty()
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Builtin::FloatingLookback { .. } => 2.0,
            _ => 1.0,
        }
    }

    fn path_independent(&self) -> bool {
        matches!(
            self,
            Builtin::Constant { .. } | Builtin::GamePut { .. } | Builtin::AmericanPut { .. }
        )
    }
}

/// Discounted low payoff `f_k` and high payoff `g_k` at every lattice node.
/// At depth `n` the high payoff is set equal to the low one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePayoffs {
    name: String,
    n: usize,
    lattice: Lattice,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

impl DiscretePayoffs {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    #[inline]
    pub fn f(&self, k: usize, id: usize) -> f64 {
        self.f[k][id]
    }

    #[inline]
    pub fn g(&self, k: usize, id: usize) -> f64 {
        self.g[k][id]
    }

    pub fn f_level(&self, k: usize) -> &[f64] {
        &self.f[k]
    }

    pub fn g_level(&self, k: usize) -> &[f64] {
        &self.g[k]
    }

    /// Largest low payoff anywhere on the lattice.
    pub fn max_low(&self) -> f64 {
        self.f.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Chooses the recombining lattice when the payoff allows it.
pub fn natural_lattice(payoff: &dyn Payoff) -> Lattice {
    if payoff.path_independent() {
        Lattice::Recombined
    } else {
        Lattice::Full
    }
}

/// Evaluates `F` and `G` on the step path of every node at time `kT/n` and
/// discounts by `e^{−rkT/n}`.
pub fn discretize(payoff: &dyn Payoff, model: &CrrModel, lattice: Lattice) -> Result<DiscretePayoffs> {
    let n = model.n();
    lattice.check(n)?;
    if lattice == Lattice::Recombined && !payoff.path_independent() {
        return Err(Error::NotRecombinable(payoff.name().to_string()));
    }
    let dt = model.dt();
    let times: Vec<f64> = (0..=n).map(|j| j as f64 * dt).collect();
    let mut f = Vec::with_capacity(n + 1);
    let mut g = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = times[k];
        let discount = model.discount_factor(k)?;
        let width = lattice.width(k);
        let mut fk = Vec::with_capacity(width);
        let mut gk = Vec::with_capacity(width);
        for id in 0..width {
            let values = match lattice {
                Lattice::Full => model.step_path(&lattice.representative(k, id)),
                // up moves first, so the net position climbs to `id` then falls
                Lattice::Recombined => (0..=k)
                    .map(|j| {
                        let net = if j <= id { j as i64 } else { 2 * id as i64 - j as i64 };
                        model.price_from_net(j, net)
                    })
                    .collect(),
            };
            let view = PathView::new(&times[..=k], &values);
            let low = payoff.low(t, &view);
            let high = if k == n { low } else { payoff.high(t, &view) };
            for value in [low, high] {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidPayoff {
                        name: payoff.name().to_string(),
                        depth: k,
                        value,
                    });
                }
            }
            fk.push(discount * low);
            gk.push(discount * high.max(low));
        }
        f.push(fk);
        g.push(gk);
    }
    Ok(DiscretePayoffs {
        name: payoff.name().to_string(),
        n,
        lattice,
        f,
        g,
    })
}

/// Ratio of the left side of the uniform-metric Lipschitz bound to
/// `(s + 1)·d(v, w)` for two paths sampled on the same grid, evaluated at
/// the end of the given views. Should not exceed the declared constant.
pub fn metric_quotient(payoff: &dyn Payoff, v: &PathView<'_>, w: &PathView<'_>) -> f64 {
    let s = *v.times().last().unwrap();
    let dist = v
        .values()
        .iter()
        .zip(w.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dist == 0.0 {
        return 0.0;
    }
    let lhs = (payoff.low(s, v) - payoff.low(s, w)).abs()
        + (payoff.penalty(s, v) - payoff.penalty(s, w)).abs();
    lhs / ((s + 1.0) * dist)
}

/// Ratio of the time-regularity bound for one path between the sample
/// indices `i ≤ j` (evaluation times `times[i]` and `times[j]`).
pub fn time_quotient(payoff: &dyn Payoff, v: &PathView<'_>, i: usize, j: usize) -> f64 {
    assert!(i <= j && j < v.values().len());
    let (s, t) = (v.times()[i], v.times()[j]);
    let early = v.prefix(i + 1);
    let late = v.prefix(j + 1);
    let lhs = (payoff.low(t, &late) - payoff.low(s, &early)).abs()
        + (payoff.penalty(t, &late) - payoff.penalty(s, &early)).abs();
    let sup_abs = late.values().iter().map(|x| x.abs()).fold(0.0, f64::max);
    let vs = v.values()[i];
    let osc = v.values()[i..=j]
        .iter()
        .map(|x| (x - vs).abs())
        .fold(0.0, f64::max);
    let rhs = (t - s) * (1.0 + sup_abs) + osc;
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{MarketParams, PathNode, Sign};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(r: f64, n: usize) -> CrrModel {
        CrrModel::new(MarketParams::new(r, 0.2, 0.02, 1.0, 100.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn constant_payoff_is_constant() {
        let m = model(0.0, 5);
        let p = Builtin::Constant { level: 3.0, penalty: 1.5 };
        for lattice in [Lattice::Full, Lattice::Recombined] {
            let d = discretize(&p, &m, lattice).unwrap();
            for k in 0..5 {
                for id in 0..lattice.width(k) {
                    assert_eq!(d.f(k, id), 3.0);
                    assert_eq!(d.g(k, id), 4.5);
                }
            }
            assert!(d.f_level(5).iter().all(|&v| v == 3.0));
            assert_eq!(d.f_level(5), d.g_level(5));
        }
    }

    #[test]
    fn at_the_money_put_root() {
        let m = model(0.0, 3);
        let d = discretize(&Builtin::GamePut { strike: 100.0, penalty: 5.0 }, &m, Lattice::Full).unwrap();
        assert_eq!(d.f(0, 0), 0.0);
        assert_eq!(d.g(0, 0), 5.0);
    }

    #[test]
    fn game_put_hinge() {
        let p = Builtin::from_name(
            "game_put_const_penalty",
            BuiltinParams { strike: Some(100.0), penalty: Some(5.0), level: None },
        )
        .unwrap();
        let times = [0.0, 0.5];
        let values = [100.0, 90.0];
        let view = PathView::new(&times, &values);
        assert_eq!(p.low(0.5, &view), 10.0);
        assert_eq!(p.high(0.5, &view), 15.0);
    }

    #[test]
    fn floating_lookback_on_up_down_path() {
        // Step path values S0, S0·e^{h}, S0; running max minus current.
        let m = model(0.0, 4);
        let d = discretize(&Builtin::FloatingLookback { penalty: 0.0 }, &m, Lattice::Full).unwrap();
        let node = PathNode::from_signs(&[Sign::Up, Sign::Down]);
        let h = 0.2 * (0.25f64).sqrt();
        let expected = 100.0 * h.exp() - 100.0;
        assert_relative_eq!(d.f(2, Lattice::Full.index(&node)), expected, max_relative = 1e-13);
    }

    #[test]
    fn lookback_put_all_down() {
        let m = model(0.03, 4);
        let p = Builtin::LookbackPut { strike: 100.0, penalty: 1.0 };
        let d = discretize(&p, &m, Lattice::Full).unwrap();
        let node = PathNode::from_signs(&[Sign::Down; 4]);
        let terminal = m.stock_price(&node).unwrap();
        let values = m.step_path(&node);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, terminal);
        let expected = m.discount_factor(4).unwrap() * (100.0 - terminal);
        assert_relative_eq!(d.f(4, 0), expected, max_relative = 1e-14);
    }

    #[test]
    fn discounting_is_exact() {
        let r = 0.07;
        let m = model(r, 6);
        let undiscounted = model(0.0, 6);
        let p = Builtin::Constant { level: 2.0, penalty: 1.0 };
        let d = discretize(&p, &m, Lattice::Recombined).unwrap();
        let u = discretize(&p, &undiscounted, Lattice::Recombined).unwrap();
        for k in 0..=6 {
            let factor = (-r * k as f64 / 6.0).exp();
            assert!((d.f(k, 0) - factor * u.f(k, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn recombination_certificate() {
        let m = model(0.04, 7);
        for p in [
            Builtin::GamePut { strike: 100.0, penalty: 3.0 },
            Builtin::AmericanPut { strike: 95.0 },
        ] {
            let full = discretize(&p, &m, Lattice::Full).unwrap();
            let rec = discretize(&p, &m, Lattice::Recombined).unwrap();
            for k in 0..=7 {
                for id in 0..Lattice::Full.width(k) {
                    let ups = (id as u64).count_ones() as usize;
                    assert!((full.f(k, id) - rec.f(k, ups)).abs() < 1e-12);
                    assert!((full.g(k, id) - rec.g(k, ups)).abs() < 1e-12);
                }
            }
        }
        // A path-dependent payoff is refused on the recombining lattice.
        let err = discretize(&Builtin::LookbackPut { strike: 100.0, penalty: 0.0 }, &m, Lattice::Recombined);
        assert!(matches!(err, Err(Error::NotRecombinable(_))));
    }

    #[test]
    fn lookback_is_not_recombinable() {
        let m = model(0.0, 4);
        let d = discretize(&Builtin::LookbackPut { strike: 101.0, penalty: 0.0 }, &m, Lattice::Full).unwrap();
        let a = Lattice::Full.index(&PathNode::from_signs(&[Sign::Down, Sign::Up]));
        let b = Lattice::Full.index(&PathNode::from_signs(&[Sign::Up, Sign::Down]));
        assert!((d.f(2, a) - d.f(2, b)).abs() > 1e-3);
    }

    #[test]
    fn high_dominates_low() {
        let m = model(0.02, 6);
        for p in [
            Builtin::GamePut { strike: 100.0, penalty: 2.0 },
            Builtin::AmericanPut { strike: 100.0 },
            Builtin::LookbackPut { strike: 100.0, penalty: 1.0 },
            Builtin::FloatingLookback { penalty: 0.5 },
        ] {
            let d = discretize(&p, &m, Lattice::Full).unwrap();
            for k in 0..=6 {
                for id in 0..Lattice::Full.width(k) {
                    assert!(d.g(k, id) >= d.f(k, id));
                    assert!(d.f(k, id) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn unknown_and_incomplete_names() {
        assert!(matches!(
            Builtin::from_name("barrier", BuiltinParams::default()),
            Err(Error::UnknownPayoff(_))
        ));
        assert!(matches!(
            Builtin::from_name("american_put", BuiltinParams::default()),
            Err(Error::MissingPayoffParameter { .. })
        ));
        let ok = Builtin::from_name(
            "american_put",
            BuiltinParams { strike: Some(100.0), ..Default::default() },
        )
        .unwrap();
        let times = [0.0];
        let values = [100.0];
        assert_eq!(ok.penalty(0.0, &PathView::new(&times, &values)), 1e8);
    }

    struct Negative;
    impl Payoff for Negative {
        fn name(&self) -> &str {
            "negative"
        }
        fn low(&self, t: f64, _: &PathView<'_>) -> f64 {
            if t > 0.5 { -1.0 } else { 0.0 }
        }
        fn penalty(&self, _: f64, _: &PathView<'_>) -> f64 {
            0.0
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
        fn path_independent(&self) -> bool {
            true
        }
    }

    #[test]
    fn negative_payoff_is_rejected() {
        let m = model(0.0, 4);
        assert!(matches!(
            discretize(&Negative, &m, Lattice::Recombined),
            Err(Error::InvalidPayoff { depth: 3, .. })
        ));
    }

    fn builtin_strategy() -> impl Strategy<Value = Builtin> {
        prop_oneof![
            (50.0..150.0f64, 0.0..10.0f64).prop_map(|(strike, penalty)| Builtin::GamePut { strike, penalty }),
            (50.0..150.0f64, 0.0..10.0f64).prop_map(|(strike, penalty)| Builtin::LookbackPut { strike, penalty }),
            (0.0..10.0f64).prop_map(|penalty| Builtin::FloatingLookback { penalty }),
            (50.0..150.0f64).prop_map(|strike| Builtin::AmericanPut { strike }),
        ]
    }

    proptest! {
        #[test]
        fn declared_lipschitz_constant_bounds_samples(
            payoff in builtin_strategy(),
            base in proptest::collection::vec(60.0..140.0f64, 2..12),
            noise in proptest::collection::vec(-5.0..5.0f64, 12),
            cut in 0usize..12,
        ) {
            let len = base.len();
            let times: Vec<f64> = (0..len).map(|i| i as f64 * 0.1).collect();
            let other: Vec<f64> = base.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let v = PathView::new(&times, &base);
            let w = PathView::new(&times, &other);
            let l = payoff.lipschitz();
            prop_assert!(metric_quotient(&payoff, &v, &w) <= l + 1e-12);
            let j = len - 1;
            let i = cut.min(j);
            prop_assert!(time_quotient(&payoff, &v, i, j) <= l + 1e-12);
        }
    }
}
