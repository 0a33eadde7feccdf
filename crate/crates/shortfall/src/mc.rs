//! Parallel Monte Carlo drivers.
//!
//! Paths are simulated on the rayon pool, each from its own keyed stream, and
//! the per-path results are reduced in path order, so the output does not
//! depend on the number of worker threads.

use rayon::prelude::*;
use shortfall_core::embed::{
    continuous_sample, discrete_sample, simulate_embedding, ContinuousReport, Diagnostics, Estimate, McReport,
    Measure, PathStats, MARTINGALE_STREAM,
};
use shortfall_core::{CrrModel, DiscretePayoffs, Error, Payoff, PolicyTable, Result};

fn check(num_paths: usize, model: &CrrModel, policy: &PolicyTable) -> Result<()> {
    if num_paths < 2 {
        return Err(Error::TooFewPaths {
            got: num_paths,
            min: 2,
        });
    }
    if policy.n() != model.n() {
        return Err(Error::StepMismatch {
            policy: policy.n(),
            requested: model.n(),
        });
    }
    Ok(())
}

/// Density at `θ_n` over a companion batch simulated under the martingale
/// measure.
pub fn density_batch(model: &CrrModel, num_paths: usize, seed: u64, dt_fine: f64) -> Result<Vec<f64>> {
    (0..num_paths as u64)
        .into_par_iter()
        .map(|i| {
            simulate_embedding(model.params(), model.n(), dt_fine, Measure::Martingale, seed, MARTINGALE_STREAM | i)
                .map(|p| p.z_terminal())
        })
        .collect()
}

/// Expected shortfall of the discrete hedge on embedded sign paths.
pub fn discrete(
    model: &CrrModel,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    num_paths: usize,
    seed: u64,
    dt_fine: f64,
) -> Result<McReport> {
    check(num_paths, model, policy)?;
    let rows: Vec<(f64, PathStats)> = (0..num_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_embedding(model.params(), model.n(), dt_fine, Measure::Objective, seed, i)?;
            Ok((discrete_sample(model, payoffs, policy, x, &path)?, PathStats::of(&path)))
        })
        .collect::<Result<_>>()?;
    let z = density_batch(model, num_paths, seed, dt_fine)?;
    let (samples, stats): (Vec<f64>, Vec<PathStats>) = rows.into_iter().unzip();
    Ok(McReport {
        estimate: Estimate::from_samples(&samples),
        diagnostics: Diagnostics::from_stats(&stats, model.n(), &z),
    })
}

/// Restricted-adversary diagnostic of the lifted hedge against the true
/// payoff.
#[allow(clippy::too_many_arguments)]
pub fn continuous(
    model: &CrrModel,
    payoff: &dyn Payoff,
    payoffs: &DiscretePayoffs,
    policy: &PolicyTable,
    x: f64,
    num_paths: usize,
    seed: u64,
    dt_fine: f64,
) -> Result<ContinuousReport> {
    check(num_paths, model, policy)?;
    let rows: Vec<(Vec<f64>, PathStats)> = (0..num_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = simulate_embedding(model.params(), model.n(), dt_fine, Measure::Objective, seed, i)?;
            Ok((
                continuous_sample(model, payoff, payoffs, policy, x, &path)?,
                PathStats::of(&path),
            ))
        })
        .collect::<Result<_>>()?;
    let z = density_batch(model, num_paths, seed, dt_fine)?;
    let (samples, stats): (Vec<Vec<f64>>, Vec<PathStats>) = rows.into_iter().unzip();
    Ok(ContinuousReport::from_rows(
        &samples,
        Diagnostics::from_stats(&stats, model.n(), &z),
    ))
}
