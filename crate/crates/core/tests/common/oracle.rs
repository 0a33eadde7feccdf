//! Brute-force reference for the shortfall recursion on small trees.
//!
//! Works on the full tree of sign words with payoffs recomputed from gross
//! returns. Value functions below the root are tabulated on a uniform wealth
//! grid and interpolated linearly; each tabulated value minimizes over a
//! uniform exposure grid, then over a finer grid around the best coarse
//! point. The root is minimized directly at the requested capital.

pub const U_POINTS: usize = 10_000;
pub const ZOOM_POINTS: usize = 1_000;

pub struct Market {
    pub r: f64,
    pub kappa: f64,
    pub mu: f64,
    pub horizon: f64,
    pub s0: f64,
    pub n: usize,
}

impl Market {
    fn dt(&self) -> f64 {
        self.horizon / self.n as f64
    }
    fn up(&self) -> f64 {
        (self.kappa * self.dt().sqrt()).exp() - 1.0
    }
    fn down(&self) -> f64 {
        (-self.kappa * self.dt().sqrt()).exp() - 1.0
    }
    fn p(&self) -> f64 {
        1.0 / (((self.kappa - 2.0 * self.mu / self.kappa) * self.dt().sqrt()).exp() + 1.0)
    }
}

/// `(low, high)` payoff at time `t` of the undiscounted step path.
pub type PayoffFn = dyn Fn(f64, &[f64]) -> (f64, f64);

#[derive(Clone, Copy, PartialEq)]
pub enum Kind {
    Game,
    American,
}

enum Value {
    Hinge(f64),
    Grid { ys: Vec<f64>, vals: Vec<f64> },
}

impl Value {
    fn at(&self, y: f64) -> f64 {
        match self {
            Value::Hinge(c) => (c - y).max(0.0),
            Value::Grid { ys, vals } => {
                let i = ys.partition_point(|&x| x <= y);
                if i == 0 {
                    return vals[0];
                }
                if i == ys.len() {
                    return 0.0;
                }
                let w = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
                vals[i - 1] * (1.0 - w) + vals[i] * w
            }
        }
    }
}

pub struct Oracle {
    market: Market,
    kind: Kind,
    /// `f[k][bits]`, `g[k][bits]`, discounted.
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    level1: Vec<Value>,
}

fn best(objective: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return objective(lo);
    }
    let du = (hi - lo) / U_POINTS as f64;
    let mut arg = 0;
    let mut val = f64::INFINITY;
    for i in 0..=U_POINTS {
        let v = objective(lo + du * i as f64);
        if v < val {
            val = v;
            arg = i;
        }
    }
    let zlo = lo + du * arg.saturating_sub(1) as f64;
    let zhi = (lo + du * (arg + 1) as f64).min(hi);
    let dz = (zhi - zlo) / ZOOM_POINTS as f64;
    for i in 0..=ZOOM_POINTS {
        val = val.min(objective(zlo + dz * i as f64));
    }
    val
}

impl Oracle {
    /// Tabulates every level below the root with `grid` wealth points per
    /// node.
    pub fn new(market: Market, payoff: &PayoffFn, kind: Kind, grid: usize) -> Oracle {
        let n = market.n;
        let dt = market.dt();
        let rn = (market.r * dt).exp() - 1.0;
        let (a1, a2) = (market.up(), market.down());
        let mut f = Vec::new();
        let mut g = Vec::new();
        for k in 0..=n {
            let mut fk = Vec::new();
            let mut gk = Vec::new();
            for bits in 0..1usize << k {
                let mut path = vec![market.s0];
                for i in 0..k {
                    let a = if bits >> i & 1 == 1 { a1 } else { a2 };
                    let last = *path.last().unwrap();
                    path.push(last * (1.0 + rn) * (1.0 + a));
                }
                let disc = (1.0 + rn).powi(-(k as i32));
                let (lo, hi) = payoff(k as f64 * dt, &path);
                fk.push(disc * lo);
                gk.push(disc * if k == n { lo } else { hi });
            }
            f.push(fk);
            g.push(gk);
        }
        let mut oracle = Oracle {
            market,
            kind,
            f,
            g,
            level1: Vec::new(),
        };
        let mut next: Vec<Value> = oracle.f[n].iter().map(|&c| Value::Hinge(c)).collect();
        for k in (1..n).rev() {
            let mut cur = Vec::new();
            for bits in 0..1usize << k {
                let cap = oracle.subtree_max(k, bits);
                let mut ys: Vec<f64> = (0..grid).map(|i| cap * i as f64 / (grid - 1) as f64).collect();
                // likely kinks: the hinge levels and the perfect-hedge threshold
                for extra in [oracle.f[k][bits], oracle.g[k][bits], oracle.subtree_price(k, bits)] {
                    if extra > 0.0 && extra < cap {
                        ys.push(extra);
                    }
                }
                ys.sort_by(f64::total_cmp);
                ys.dedup();
                let last = ys.len() - 1;
                let vals = ys
                    .iter()
                    .enumerate()
                    .map(|(i, &y)| if i == last { 0.0 } else { oracle.node_value(k, bits, y, &next) })
                    .collect();
                cur.push(Value::Grid { ys, vals });
            }
            next = cur;
        }
        oracle.level1 = next;
        oracle
    }

    fn subtree_max(&self, k: usize, bits: usize) -> f64 {
        let mut m: f64 = 0.0;
        for j in k..=self.market.n {
            for rest in 0..1usize << (j - k) {
                m = m.max(self.f[j][bits | rest << k]);
            }
        }
        m
    }

    fn node_value(&self, k: usize, bits: usize, y: f64, next: &[Value]) -> f64 {
        let (a1, a2, p) = (self.market.up(), self.market.down(), self.market.p());
        let up = &next[bits | 1 << k];
        let down = &next[bits];
        let objective = |u: f64| p * up.at((y + u * a1).max(0.0)) + (1.0 - p) * down.at((y + u * a2).max(0.0));
        let inner = best(&objective, -y / a1, -y / a2);
        let v = (self.f[k][bits] - y).max(0.0).max(inner);
        match self.kind {
            Kind::Game => v.min((self.g[k][bits] - y).max(0.0)),
            Kind::American => v,
        }
    }

    /// Shortfall risk at capital `x`.
    pub fn risk(&self, x: f64) -> f64 {
        self.node_value(0, 0, x, &self.level1)
    }

    /// Dynkin price under the martingale measure.
    pub fn price(&self) -> f64 {
        self.subtree_price(0, 0)
    }

    /// Dynkin price of the subtree rooted at `(k, bits)`.
    fn subtree_price(&self, k0: usize, bits0: usize) -> f64 {
        let n = self.market.n;
        let q = 1.0 / ((self.market.kappa * self.market.dt().sqrt()).exp() + 1.0);
        let mut next: Vec<f64> = (0..1usize << (n - k0)).map(|rest| self.f[n][bits0 | rest << k0]).collect();
        for k in (k0..n).rev() {
            next = (0..1usize << (k - k0))
                .map(|rest| {
                    let bits = bits0 | rest << k0;
                    let c = q * next[rest | 1 << (k - k0)] + (1.0 - q) * next[rest];
                    let v = self.f[k][bits].max(c);
                    match self.kind {
                        Kind::Game => v.min(self.g[k][bits]),
                        Kind::American => v,
                    }
                })
                .collect();
        }
        next[0]
    }
}
