//! Serializable outputs.

use serde::Serialize;
use shortfall_core::embed::{ContinuousReport, Diagnostics, Estimate, McReport};
use shortfall_core::hedge::HedgeTrajectory;
use shortfall_core::risk::RiskReport;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RiskJson {
    pub payoff: String,
    pub mode: &'static str,
    pub n: usize,
    pub x: f64,
    pub risk: f64,
    pub price: f64,
    /// Wealth intervals at the root where the seller cancels at once; an
    /// unbounded interval ends in `null`.
    pub seller_stop: Vec<(f64, Option<f64>)>,
    /// Largest breakpoint count of the value functions, by depth.
    pub breakpoints: Vec<usize>,
}

impl From<&RiskReport> for RiskJson {
    fn from(r: &RiskReport) -> RiskJson {
        RiskJson {
            payoff: r.payoff.clone(),
            mode: r.style.as_str(),
            n: r.n,
            x: r.x,
            risk: r.risk,
            price: r.price,
            seller_stop: r
                .root_seller_stop
                .iter()
                .map(|&(lo, hi)| (lo, hi.is_finite().then_some(hi)))
                .collect(),
            breakpoints: r.breakpoints.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PriceJson {
    pub payoff: String,
    pub mode: &'static str,
    pub n: usize,
    pub price: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DiagnosticsJson {
    pub up_fraction: f64,
    pub mean_u_n: f64,
    pub mean_w_n: f64,
    pub mean_theta_n: f64,
    pub z_mean: f64,
    pub z_stderr: f64,
}

impl From<&Diagnostics> for DiagnosticsJson {
    fn from(d: &Diagnostics) -> DiagnosticsJson {
        DiagnosticsJson {
            up_fraction: d.up_fraction,
            mean_u_n: d.mean_u_n,
            mean_w_n: d.mean_w_n,
            mean_theta_n: d.mean_theta_n,
            z_mean: d.z_mean.mean,
            z_stderr: d.z_mean.stderr,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct McJson {
    pub payoff: String,
    pub mode: &'static str,
    pub n: usize,
    pub x: f64,
    pub paths: usize,
    pub seed: u64,
    pub dt_fine: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Root value of the recursion, the exact mean of the estimator.
    pub risk: f64,
    pub diagnostics: DiagnosticsJson,
}

impl McJson {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        payoff: &str,
        mode: &'static str,
        n: usize,
        x: f64,
        seed: u64,
        dt_fine: f64,
        risk: f64,
        r: &McReport,
    ) -> McJson {
        McJson {
            payoff: payoff.to_string(),
            mode,
            n,
            x,
            paths: r.estimate.count,
            seed,
            dt_fine,
            estimate: r.estimate.mean,
            stderr: r.estimate.stderr,
            risk,
            diagnostics: (&r.diagnostics).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CandidateJson {
    /// `"theta_j"` for `T ∧ θ_j`, `"T"` for the horizon, `"discrete_best"`
    /// for the mapped discrete best response.
    pub buyer: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct McDiagJson {
    pub payoff: String,
    pub mode: &'static str,
    pub n: usize,
    pub x: f64,
    pub paths: usize,
    pub seed: u64,
    pub dt_fine: f64,
    /// Largest mean over the restricted buyer family: a lower bound for the
    /// continuous risk of the lifted hedge, not an estimate of it.
    pub kind: &'static str,
    pub estimate: f64,
    pub stderr: f64,
    pub best: String,
    /// Root value of the n-step recursion.
    pub discrete_risk: f64,
    pub candidates: Vec<CandidateJson>,
    pub diagnostics: DiagnosticsJson,
}

fn candidate_name(n: usize, j: usize) -> String {
    match j {
        j if j < n => format!("theta_{j}"),
        j if j == n => "T".to_string(),
        _ => "discrete_best".to_string(),
    }
}

impl McDiagJson {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        payoff: &str,
        mode: &'static str,
        n: usize,
        x: f64,
        seed: u64,
        dt_fine: f64,
        discrete_risk: f64,
        r: &ContinuousReport,
    ) -> McDiagJson {
        let candidates = r
            .per_candidate
            .iter()
            .enumerate()
            .map(|(j, e): (usize, &Estimate)| CandidateJson {
                buyer: candidate_name(n, j),
                mean: e.mean,
                stderr: e.stderr,
            })
            .collect();
        McDiagJson {
            payoff: payoff.to_string(),
            mode,
            n,
            x,
            paths: r.estimate.count,
            seed,
            dt_fine,
            kind: "restricted_adversary",
            estimate: r.estimate.mean,
            stderr: r.estimate.stderr,
            best: candidate_name(n, r.best),
            discrete_risk,
            candidates,
            diagnostics: (&r.diagnostics).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CurveRow {
    pub x: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergeRow {
    pub n: usize,
    pub risk: f64,
    /// Change from the previous row; empty on the first.
    pub delta: Option<f64>,
    /// `n^{-1/4} (ln n)^{3/4}`.
    pub envelope: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReplayRow {
    pub k: usize,
    pub wealth: f64,
    pub stock: f64,
    pub exposure: f64,
    pub gamma: f64,
    pub beta: f64,
    pub seller_stop: bool,
    pub buyer_stop: bool,
}

pub fn replay_rows(t: &HedgeTrajectory) -> Vec<ReplayRow> {
    t.steps
        .iter()
        .map(|s| ReplayRow {
            k: s.k,
            wealth: s.wealth,
            stock: s.stock,
            exposure: s.exposure,
            gamma: s.gamma,
            beta: s.beta,
            seller_stop: s.seller_stop,
            buyer_stop: s.buyer_stop,
        })
        .collect()
}

/// Serializes rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
