//! Skorokhod embedding of the CRR walk into a simulated Brownian market.
//!
//! `B*` is simulated on a fine Euler grid; the k-th embedding time is the end
//! of the first grid step during which `B*` moved `√(T/n)` away from its value
//! at the previous one. A step counts as crossing when its endpoint lies
//! beyond the barrier or, failing that, when the Brownian bridge between the
//! two grid values touches it (sampled with the exact crossing probability).
//! The crossing value is snapped onto the barrier, so the embedded increments
//! are exactly `±√(T/n)` and the induced sign path has the CRR law. Only the
//! exit times carry a gridding error of at most one fine step each.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, index)`, so
//! results do not depend on the order in which paths are simulated.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::hedge::replay;
use crate::market::{CrrModel, MarketParams, Sign};
use crate::math::{exp, sqrt};
use crate::payoff::{DiscretePayoffs, PathView, Payoff};
use crate::risk::PolicyTable;

/// The fine step may be at most this fraction of `T/n`.
pub const RESOLUTION: f64 = 64.0;
/// Simulation stops with an error after this many multiples of `T`.
pub const BUDGET_HORIZONS: usize = 200;
/// Stream offset used for the companion batch under the martingale measure.
pub const MARTINGALE_STREAM: u64 = 1 << 63;

/// Law of the simulated Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// `B*` has drift `μ/κ − κ/2`.
    Objective,
    /// `B*` has drift `−κ/2`, making the discounted stock a martingale.
    Martingale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPath {
    horizon: f64,
    dt_fine: f64,
    /// `B*` at grid times `i·dt_fine`, snapped at exits.
    bstar: Vec<f64>,
    /// Grid indices of `θ_0 = 0, θ_1, …, θ_n`.
    exits: Vec<usize>,
    signs: Vec<Sign>,
    /// `μ/κ`, for the density.
    ratio: f64,
    /// Drift of `B*` used in the simulation.
    drift_objective: f64,
}

impl EmbeddedPath {
    pub fn n(&self) -> usize {
        self.signs.len()
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_fine
    }

    /// Number of grid steps covering `[0, T]`.
    pub fn horizon_index(&self) -> usize {
        libm::round(self.horizon / self.dt_fine) as usize
    }

    pub fn bstar(&self) -> &[f64] {
        &self.bstar
    }

    pub fn exit_indices(&self) -> &[usize] {
        &self.exits
    }

    pub fn theta(&self, k: usize) -> f64 {
        self.exits[k] as f64 * self.dt_fine
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.exits.len()).map(|k| self.theta(k)).collect()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// Embedded increments `b_k = B*_{θ_k} − B*_{θ_{k−1}}`.
    pub fn increments(&self) -> Vec<f64> {
        self.exits.windows(2).map(|w| self.bstar[w[1]] - self.bstar[w[0]]).collect()
    }

    /// `max_k |θ_k − kT/n|`.
    pub fn u_n(&self) -> f64 {
        let step = self.horizon / self.n() as f64;
        (0..=self.n())
            .map(|k| (self.theta(k) - k as f64 * step).abs())
            .fold(0.0, f64::max)
    }

    /// Largest spacing of the embedding times plus `|T − θ_n|`.
    pub fn w_n(&self) -> f64 {
        let spacing = (1..=self.n()).map(|k| self.theta(k) - self.theta(k - 1)).fold(0.0, f64::max);
        spacing + (self.horizon - self.theta(self.n())).abs()
    }

    /// Density `dP/dP̃` at `θ_n`: `exp((μ/κ)B + ½(μ/κ)²θ)` with
    /// `B = B* − (μ/κ − κ/2)t`.
    pub fn z_terminal(&self) -> f64 {
        let t = self.theta(self.n());
        let b = self.bstar[self.exits[self.n()]] - self.drift_objective * t;
        exp(self.ratio * b + 0.5 * self.ratio * self.ratio * t)
    }

    pub fn up_count(&self) -> usize {
        self.signs.iter().filter(|&&s| s == Sign::Up).count()
    }
}

/// Fine grid step actually used: the largest `T/m` not exceeding the request.
pub fn grid_step(horizon: f64, dt_fine: f64) -> f64 {
    horizon / libm::ceil(horizon / dt_fine - 1e-9)
}

/// Simulates one path with the embedding times of the n-step walk.
///
/// The grid continues past `T` when `θ_n < T`, so payoffs can be evaluated
/// up to the horizon.
pub fn simulate_embedding(
    params: &MarketParams,
    n: usize,
    dt_fine: f64,
    measure: Measure,
    seed: u64,
    stream: u64,
) -> Result<EmbeddedPath> {
    params.validate()?;
    if n == 0 {
        return Err(Error::ZeroSteps);
    }
    let step = params.horizon / n as f64;
    let limit = step / RESOLUTION;
    if !(dt_fine > 0.0 && dt_fine <= limit * (1.0 + 1e-12)) {
        return Err(Error::Resolution { dt_fine, limit });
    }
    let dt = grid_step(params.horizon, dt_fine);
    let horizon_steps = libm::round(params.horizon / dt) as usize;
    let budget = BUDGET_HORIZONS * horizon_steps;
    let barrier = sqrt(step);
    let drift = match measure {
        Measure::Objective => params.bstar_drift(),
        Measure::Martingale => -0.5 * params.kappa,
    };
    let mean = drift * dt;
    let sd = sqrt(dt);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut bstar = Vec::with_capacity(horizon_steps + horizon_steps / 8 + 2);
    let mut exits = Vec::with_capacity(n + 1);
    let mut signs = Vec::with_capacity(n);
    let mut x = 0.0;
    let mut anchor = 0.0;
    bstar.push(x);
    exits.push(0);
    let mut i = 0usize;
    while signs.len() < n || i < horizon_steps {
        if i >= budget {
            return Err(Error::Budget {
                steps: budget,
                exits: signs.len(),
                n,
            });
        }
        let z: f64 = StandardNormal.sample(&mut rng);
        let x0 = x;
        x += mean + sd * z;
        i += 1;
        if signs.len() < n {
            let (upper, lower) = (anchor + barrier, anchor - barrier);
            let side = if x >= upper {
                Some(Sign::Up)
            } else if x <= lower {
                Some(Sign::Down)
            } else if bridge_crosses(&mut rng, upper - x0, upper - x, dt) {
                Some(Sign::Up)
            } else if bridge_crosses(&mut rng, x0 - lower, x - lower, dt) {
                Some(Sign::Down)
            } else {
                None
            };
            if let Some(s) = side {
                x = anchor + s.value() * barrier;
                anchor = x;
                signs.push(s);
                exits.push(i);
            }
        }
        bstar.push(x);
    }
    Ok(EmbeddedPath {
        horizon: params.horizon,
        dt_fine: dt,
        bstar,
        exits,
        signs,
        ratio: params.mu / params.kappa,
        drift_objective: params.bstar_drift(),
    })
}

/// Whether a Brownian bridge over one grid step, starting `d0 > 0` and
/// ending `d1 > 0` below a barrier, touched it in between.
fn bridge_crosses(rng: &mut ChaCha8Rng, d0: f64, d1: f64, dt: f64) -> bool {
    let p = exp(-2.0 * d0 * d1 / dt);
    if p < 1e-15 {
        return false;
    }
    let u: f64 = Open01.sample(rng);
    u < p
}

/// Realized shortfall of the discrete hedge on the sign path induced by the
/// embedding.
pub fn discrete_sample(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    path: &EmbeddedPath,
) -> Result<f64> {
    if path.n() != model.n() {
        return Err(Error::StepMismatch {
            policy: model.n(),
            requested: path.n(),
        });
    }
    Ok(replay(model, payoffs, policy, x, path.signs(), None)?.shortfall)
}

/// Shortfalls of the lifted hedge against the true payoff on the simulated
/// price path.
///
/// The seller stops at `T ∧ θ_σ` (or `T` when the discrete seller never
/// cancels). Entry `j ≤ n` is the shortfall when the buyer exercises at
/// `T ∧ θ_j` (at `T` for `j = n`); the last entry uses the discrete
/// best-response date of the replay.
pub fn continuous_sample(
    model: &CrrModel,
    payoff: &dyn Payoff,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    path: &EmbeddedPath,
) -> Result<Vec<f64>> {
    let n = model.n();
    if path.n() != n {
        return Err(Error::StepMismatch {
            policy: n,
            requested: path.n(),
        });
    }
    let trajectory = replay(model, payoffs, policy, x, path.signs(), None)?;
    let params = model.params();
    let dt = path.dt_fine();
    let horizon = path.horizon_index();
    let len = horizon + 1;
    let times: Vec<f64> = (0..len).map(|i| i as f64 * dt).collect();
    let prices: Vec<f64> = (0..len)
        .map(|i| params.s0 * exp(params.r * times[i] + params.kappa * path.bstar[i]))
        .collect();
    let exits = path.exit_indices();
    let date = |j: usize| if j < n { exits[j].min(horizon) } else { horizon };
    let wealth_at = |i: usize| {
        let k = exits.partition_point(|&e| e <= i) - 1;
        if k >= n {
            trajectory.steps[n].wealth
        } else {
            let step = &trajectory.steps[k];
            let growth = libm::expm1(params.kappa * (path.bstar[i] - path.bstar[exits[k]]));
            step.wealth + step.exposure * growth
        }
    };
    let settle = |j: usize| {
        let s = trajectory.sigma;
        let (i, buyer) = if j <= s { (date(j), true) } else { (date(s), false) };
        let t = times[i];
        let view = PathView::new(&times[..=i], &prices[..=i]);
        let raw = if buyer {
            payoff.low(t, &view)
        } else {
            payoff.high(t, &view)
        };
        let q = exp(-params.r * t) * raw;
        (q - wealth_at(i)).max(0.0)
    };
    let mut out: Vec<f64> = (0..=n).map(settle).collect();
    out.push(settle(trajectory.tau.unwrap_or(n)));
    Ok(out)
}

/// Sample mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    /// Summarizes samples in the given order.
    pub fn from_samples(samples: &[f64]) -> Estimate {
        let count = samples.len();
        if count == 0 {
            return Estimate::default();
        }
        let mean = samples.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: sqrt(var / count as f64),
            count,
        }
    }

    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.stderr
        }
    }
}

/// Per-path embedding statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub ups: usize,
    pub u_n: f64,
    pub w_n: f64,
    pub theta_n: f64,
}

impl PathStats {
    pub fn of(path: &EmbeddedPath) -> PathStats {
        PathStats {
            ups: path.up_count(),
            u_n: path.u_n(),
            w_n: path.w_n(),
            theta_n: path.theta(path.n()),
        }
    }
}

/// Averages of [`PathStats`] over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub up_fraction: f64,
    pub mean_u_n: f64,
    pub mean_w_n: f64,
    pub mean_theta_n: f64,
    /// Mean of the density at `θ_n` over a companion batch simulated under
    /// the martingale measure; should be close to 1.
    pub z_mean: Estimate,
}

impl Diagnostics {
    pub fn from_stats(stats: &[PathStats], n: usize, z: &[f64]) -> Diagnostics {
        let m = stats.len().max(1) as f64;
        let ups: usize = stats.iter().map(|s| s.ups).sum();
        Diagnostics {
            up_fraction: ups as f64 / (m * n as f64),
            mean_u_n: stats.iter().map(|s| s.u_n).sum::<f64>() / m,
            mean_w_n: stats.iter().map(|s| s.w_n).sum::<f64>() / m,
            mean_theta_n: stats.iter().map(|s| s.theta_n).sum::<f64>() / m,
            z_mean: Estimate::from_samples(z),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub estimate: Estimate,
    pub diagnostics: Diagnostics,
}

/// Restricted-adversary estimate: the largest sample mean over the finite
/// family of buyer dates. It bounds the continuous risk of the lifted hedge
/// from below and is not an estimate of the continuous shortfall risk.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousReport {
    pub estimate: Estimate,
    /// Per buyer candidate: `T ∧ θ_j` for `j = 0..n`, then the mapped
    /// discrete best response.
    pub per_candidate: Vec<Estimate>,
    /// Index of the maximizing candidate.
    pub best: usize,
    pub diagnostics: Diagnostics,
}

impl ContinuousReport {
    /// Column-wise summary of per-path candidate shortfalls.
    pub fn from_rows(rows: &[Vec<f64>], diagnostics: Diagnostics) -> ContinuousReport {
        let width = rows.first().map_or(0, Vec::len);
        let per_candidate: Vec<Estimate> = (0..width)
            .map(|c| {
                let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                Estimate::from_samples(&col)
            })
            .collect();
        let mut best = 0;
        for (i, e) in per_candidate.iter().enumerate() {
            if e.mean > per_candidate[best].mean {
                best = i;
            }
        }
        ContinuousReport {
            estimate: per_candidate.get(best).copied().unwrap_or_default(),
            per_candidate,
            best,
            diagnostics,
        }
    }
}

fn check_paths(num_paths: usize) -> Result<()> {
    if num_paths < 2 {
        return Err(Error::TooFewPaths {
            got: num_paths,
            min: 2,
        });
    }
    Ok(())
}

fn z_batch(params: &MarketParams, n: usize, dt_fine: f64, seed: u64, num_paths: usize) -> Result<Vec<f64>> {
    (0..num_paths as u64)
        .map(|i| simulate_embedding(params, n, dt_fine, Measure::Martingale, seed, MARTINGALE_STREAM | i).map(|p| p.z_terminal()))
        .collect()
}

/// Monte Carlo estimate of the expected shortfall of the discrete hedge on
/// embedded sign paths (single-threaded).
#[allow(clippy::too_many_arguments)]
pub fn mc_discrete_shortfall(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    num_paths: usize,
    seed: u64,
    dt_fine: f64,
) -> Result<McReport> {
    check_paths(num_paths)?;
    if policy.n() != model.n() {
        return Err(Error::StepMismatch {
            policy: policy.n(),
            requested: model.n(),
        });
    }
    let mut samples = Vec::with_capacity(num_paths);
    let mut stats = Vec::with_capacity(num_paths);
    for i in 0..num_paths as u64 {
        let path = simulate_embedding(model.params(), model.n(), dt_fine, Measure::Objective, seed, i)?;
        samples.push(discrete_sample(model, payoffs, policy, x, &path)?);
        stats.push(PathStats::of(&path));
    }
    let z = z_batch(model.params(), model.n(), dt_fine, seed, num_paths)?;
    Ok(McReport {
        estimate: Estimate::from_samples(&samples),
        diagnostics: Diagnostics::from_stats(&stats, model.n(), &z),
    })
}

/// Restricted-adversary Monte Carlo diagnostic of the lifted hedge against
/// the true payoff (single-threaded).
#[allow(clippy::too_many_arguments)]
pub fn mc_continuous_diagnostic(
    model: &CrrModel,
    payoff: &dyn Payoff,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    num_paths: usize,
    seed: u64,
    dt_fine: f64,
) -> Result<ContinuousReport> {
    check_paths(num_paths)?;
    let mut rows = Vec::with_capacity(num_paths);
    let mut stats = Vec::with_capacity(num_paths);
    for i in 0..num_paths as u64 {
        let path = simulate_embedding(model.params(), model.n(), dt_fine, Measure::Objective, seed, i)?;
        rows.push(continuous_sample(model, payoff, payoffs, policy, x, &path)?);
        stats.push(PathStats::of(&path));
    }
    let z = z_batch(model.params(), model.n(), dt_fine, seed, num_paths)?;
    Ok(ContinuousReport::from_rows(
        &rows,
        Diagnostics::from_stats(&stats, model.n(), &z),
    ))
}
