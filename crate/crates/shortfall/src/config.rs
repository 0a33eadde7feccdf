//! JSON run configuration.

use std::path::Path;

use serde::Deserialize;
use shortfall_core::payoff::{discretize, natural_lattice, BuiltinParams};
use shortfall_core::{Builtin, CrrModel, DiscretePayoffs, MarketParams, Sign, Style};

use crate::{AppError, AppResult};

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub r: f64,
    pub kappa: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub b0: f64,
}

impl MarketConfig {
    pub fn params(&self) -> AppResult<MarketParams> {
        Ok(MarketParams::new(self.r, self.kappa, self.mu, self.horizon, self.s0, self.b0)?)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub name: String,
    #[serde(default)]
    pub strike: Option<f64>,
    #[serde(default)]
    pub penalty: Option<f64>,
    #[serde(default)]
    pub level: Option<f64>,
}

impl PayoffConfig {
    pub fn builtin(&self) -> AppResult<Builtin> {
        Ok(Builtin::from_name(
            &self.name,
            BuiltinParams {
                strike: self.strike,
                penalty: self.penalty,
                level: self.level,
            },
        )?)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Game,
    American,
}

impl From<Mode> for Style {
    fn from(m: Mode) -> Style {
        match m {
            Mode::Game => Style::Game,
            Mode::American => Style::American,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketConfig,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dt_fine: Option<f64>,
    /// Sign word for `replay`, e.g. `"+-+-"`.
    #[serde(default)]
    pub path: Option<String>,
    /// Buyer exercise date for `replay`.
    #[serde(default)]
    pub buyer_time: Option<usize>,
}

pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 1;
/// Default fine step as a fraction of `T/n`.
pub const DEFAULT_FINE_RATIO: f64 = 256.0;

impl RunConfig {
    pub fn from_json(text: &str) -> AppResult<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(AppError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_json(&text).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    fn validate(&self) -> AppResult<()> {
        self.market.params()?;
        self.payoff.builtin()?;
        if self.n == Some(0) || self.n_list.as_ref().is_some_and(|l| l.contains(&0)) {
            return Err(AppError::config("field `n`: step count must be at least 1"));
        }
        let bad = |x: &f64| !(x.is_finite() && *x >= 0.0);
        if self.x.as_ref().is_some_and(bad) {
            return Err(AppError::config("field `x`: capital must be finite and nonnegative"));
        }
        if self.x_grid.as_ref().is_some_and(|g| g.iter().any(bad)) {
            return Err(AppError::config("field `x_grid`: capital must be finite and nonnegative"));
        }
        if let Some(list) = &self.n_list {
            if list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(AppError::config("field `n_list`: must be strictly ascending"));
            }
        }
        if let Some(p) = &self.path {
            self.signs_of(p)?;
        }
        Ok(())
    }

    fn signs_of(&self, word: &str) -> AppResult<Vec<Sign>> {
        word.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| Sign::from_char(c).ok_or_else(|| AppError::config(format!("field `path`: bad sign `{c}`"))))
            .collect()
    }

    pub fn style(&self) -> Style {
        self.mode.into()
    }

    pub fn steps(&self) -> AppResult<usize> {
        self.n.ok_or_else(|| AppError::config("missing field `n`"))
    }

    pub fn capital(&self) -> AppResult<f64> {
        self.x.ok_or_else(|| AppError::config("missing field `x`"))
    }

    pub fn signs(&self) -> AppResult<Vec<Sign>> {
        let word = self.path.as_deref().ok_or_else(|| AppError::config("missing field `path`"))?;
        self.signs_of(word)
    }

    pub fn model(&self, n: usize) -> AppResult<CrrModel> {
        Ok(CrrModel::new(self.market.params()?, n)?)
    }

    /// Model and discretized payoffs for `n` steps on the payoff's natural
    /// lattice.
    pub fn setup(&self, n: usize) -> AppResult<(Builtin, CrrModel, DiscretePayoffs)> {
        let payoff = self.payoff.builtin()?;
        let model = self.model(n)?;
        let d = discretize(&payoff, &model, natural_lattice(&payoff))?;
        Ok((payoff, model, d))
    }

    pub fn dt_fine(&self, n: usize) -> f64 {
        self.dt_fine
            .unwrap_or(self.market.horizon / n as f64 / DEFAULT_FINE_RATIO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "market": {"r": 0.0, "kappa": 0.2, "mu": 0.02, "T": 1.0, "S0": 100.0, "b0": 1.0},
        "payoff": {"name": "game_put_const_penalty", "strike": 100.0, "penalty": 2.0},
        "n": 4, "x": 1.0
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.mode, Mode::Game);
        assert_eq!(c.market.horizon, 1.0);
        assert_eq!(c.steps().unwrap(), 4);
    }

    #[test]
    fn reports_field_and_line() {
        let text = BASE.replace("\"kappa\": 0.2, ", "");
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("kappa") && err.contains("line"), "{err}");
        let text = BASE.replace("\"n\": 4", "\"nn\": 4");
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("nn"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to) in [
            ("\"kappa\": 0.2", "\"kappa\": -0.2"),
            ("\"n\": 4", "\"n\": 0"),
            ("\"x\": 1.0", "\"x\": -1.0"),
            ("game_put_const_penalty", "barrier"),
        ] {
            let e = RunConfig::from_json(&BASE.replace(from, to)).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }

    #[test]
    fn parses_path_words() {
        let c = RunConfig::from_json(&BASE.replace("\"x\": 1.0", "\"x\": 1.0, \"path\": \"+-d u\"")).unwrap();
        assert_eq!(c.signs().unwrap(), vec![Sign::Up, Sign::Down, Sign::Down, Sign::Up]);
        assert!(RunConfig::from_json(&BASE.replace("\"x\": 1.0", "\"x\": 1.0, \"path\": \"+x\"")).is_err());
    }
}
