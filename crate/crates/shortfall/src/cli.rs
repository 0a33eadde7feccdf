//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use shortfall_core::hedge::replay;
use shortfall_core::risk::{price, solve, RiskReport};

use crate::config::{RunConfig, DEFAULT_PATHS, DEFAULT_SEED};
use crate::report::{
    replay_rows, to_csv, to_json, ConvergeRow, CurveRow, McDiagJson, McJson, PriceJson, RiskJson,
};
use crate::{mc, AppError, AppResult};

/// Steps used by `converge` when the config has no `n_list`.
pub const DEFAULT_N_LIST: [usize; 6] = [4, 8, 16, 32, 64, 128];
/// Points used by `curve` when the config has no `x_grid`.
pub const DEFAULT_CURVE_POINTS: usize = 21;

#[derive(Debug, Parser)]
#[command(name = "shortfall", version, about = "Minimal shortfall risk of game and American options on CRR lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the step count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long = "dt-fine")]
    pub dt_fine: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shortfall risk J_0(x), price and root seller-stop region (JSON).
    Risk(Common),
    /// Discrete game or American price (JSON).
    Price(Common),
    /// Risk over a capital grid (CSV).
    Curve(Common),
    /// Risk over a list of step counts (CSV).
    Converge(Common),
    /// Optimal hedge along one sign path (CSV).
    Replay(Common),
    /// Monte Carlo shortfall of the discrete hedge on embedded paths (JSON).
    Mc(Common),
    /// Restricted-adversary diagnostic against the continuous payoff (JSON).
    McDiag(Common),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Risk(c)
            | Command::Price(c)
            | Command::Curve(c)
            | Command::Converge(c)
            | Command::Replay(c)
            | Command::Mc(c)
            | Command::McDiag(c) => c,
        }
    }
}

/// Loads `--config` and applies the flag overrides.
pub fn load_config(c: &Common) -> AppResult<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(n) = c.n {
        if n == 0 {
            return Err(AppError::config("--n: step count must be at least 1"));
        }
        cfg.n = Some(n);
    }
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    if c.paths.is_some() {
        cfg.paths = c.paths;
    }
    if c.dt_fine.is_some() {
        cfg.dt_fine = c.dt_fine;
    }
    Ok(cfg)
}

/// What a command produces: the document for `--out` or stdout, and an
/// optional one-line summary for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: Vec<u8>,
    pub summary: Option<String>,
}

impl From<Vec<u8>> for Output {
    fn from(body: Vec<u8>) -> Output {
        Output { body, summary: None }
    }
}

/// Runs one subcommand against a parsed config.
pub fn execute(command: &Command, cfg: &RunConfig) -> AppResult<Output> {
    let style = cfg.style();
    match command {
        Command::Risk(_) => {
            let (_, model, d) = cfg.setup(cfg.steps()?)?;
            let report = RiskReport::new(&model, &d, style, cfg.capital()?)?;
            Ok(to_json(&RiskJson::from(&report))?.into())
        }
        Command::Price(_) => {
            let n = cfg.steps()?;
            let (_, model, d) = cfg.setup(n)?;
            Ok(to_json(&PriceJson {
                payoff: d.name().to_string(),
                mode: style.as_str(),
                n,
                price: price(&model, &d, style)?,
            })?
            .into())
        }
        Command::Curve(_) => {
            let (_, model, d) = cfg.setup(cfg.steps()?)?;
            let solution = solve(&model, &d, style, false)?;
            let grid = match &cfg.x_grid {
                Some(g) => g.clone(),
                None => {
                    let v = price(&model, &d, style)?;
                    let last = (DEFAULT_CURVE_POINTS - 1) as f64;
                    (0..DEFAULT_CURVE_POINTS).map(|i| v * i as f64 / last).collect()
                }
            };
            let rows = grid
                .iter()
                .map(|&x| Ok(CurveRow { x, risk: solution.risk(x)? }))
                .collect::<AppResult<Vec<_>>>()?;
            Ok(to_csv(&rows)?.into())
        }
        Command::Converge(_) => {
            let x = cfg.capital()?;
            let list = cfg.n_list.clone().unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
            let mut rows: Vec<ConvergeRow> = Vec::with_capacity(list.len());
            for n in list {
                let (_, model, d) = cfg.setup(n)?;
                let risk = solve(&model, &d, style, false)?.risk(x)?;
                let ln = (n as f64).ln();
                rows.push(ConvergeRow {
                    n,
                    risk,
                    delta: rows.last().map(|r| risk - r.risk),
                    envelope: (n as f64).powf(-0.25) * ln.powf(0.75),
                });
            }
            Ok(to_csv(&rows)?.into())
        }
        Command::Replay(_) => {
            let (_, model, d) = cfg.setup(cfg.steps()?)?;
            let solution = solve(&model, &d, style, false)?;
            let t = replay(&model, &d, solution.policy(), cfg.capital()?, &cfg.signs()?, cfg.buyer_time)?;
            let tau = t.tau.map_or_else(|| "none".to_string(), |k| k.to_string());
            let mut summary = format!("sigma={} tau={} shortfall={}", t.sigma, tau, t.shortfall);
            if let Some(c) = t.caller_shortfall {
                summary.push_str(&format!(" caller_shortfall={c}"));
            }
            Ok(Output {
                body: to_csv(&replay_rows(&t))?,
                summary: Some(summary),
            })
        }
        Command::Mc(_) => {
            let n = cfg.steps()?;
            let (_, model, d) = cfg.setup(n)?;
            let x = cfg.capital()?;
            let solution = solve(&model, &d, style, false)?;
            let (paths, seed, dt) = mc_settings(cfg, n);
            let r = mc::discrete(&model, &d, solution.policy(), x, paths, seed, dt)?;
            Ok(to_json(&McJson::new(d.name(), style.as_str(), n, x, seed, dt, solution.risk(x)?, &r))?.into())
        }
        Command::McDiag(_) => {
            let n = cfg.steps()?;
            let (payoff, model, d) = cfg.setup(n)?;
            let x = cfg.capital()?;
            let solution = solve(&model, &d, style, false)?;
            let (paths, seed, dt) = mc_settings(cfg, n);
            let r = mc::continuous(&model, &payoff, &d, solution.policy(), x, paths, seed, dt)?;
            Ok(to_json(&McDiagJson::new(
                d.name(),
                style.as_str(),
                n,
                x,
                seed,
                dt,
                solution.risk(x)?,
                &r,
            ))?
            .into())
        }
    }
}

fn mc_settings(cfg: &RunConfig, n: usize) -> (usize, u64, f64) {
    (
        cfg.paths.unwrap_or(DEFAULT_PATHS),
        cfg.seed.unwrap_or(DEFAULT_SEED),
        cfg.dt_fine(n),
    )
}

/// Parses the config, runs the command and writes its output.
pub fn run(cli: &Cli) -> AppResult<()> {
    let common = cli.command.common();
    let cfg = load_config(common)?;
    let out = execute(&cli.command, &cfg)?;
    if let Some(s) = &out.summary {
        eprintln!("{s}");
    }
    let bytes = out.body;
    match &common.out {
        Some(path) => std::fs::write(path, &bytes).map_err(|source| AppError::Io {
            context: path.display().to_string(),
            source,
        }),
        None => std::io::stdout().write_all(&bytes).map_err(|source| AppError::Io {
            context: "stdout".into(),
            source,
        }),
    }
}
