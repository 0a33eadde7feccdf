use alloc::string::String;

/// Errors raised by the lattice, recursion and simulation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid market parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("step count must be at least 1")]
    ZeroSteps,

    #[error("node at depth {depth} is not valid for a {n}-step model")]
    InvalidNode { depth: usize, n: usize },

    #[error("payoff `{name}` produced {value} at depth {depth}; payoffs must be finite and nonnegative")]
    InvalidPayoff { name: String, depth: usize, value: f64 },

    #[error("unknown payoff `{0}`")]
    UnknownPayoff(String),

    #[error("payoff `{name}` is missing parameter `{param}`")]
    MissingPayoffParameter { name: String, param: &'static str },

    #[error("payoff `{0}` is path dependent and cannot use a recombining lattice")]
    NotRecombinable(String),

    #[error("negative hinge level {0}")]
    NegativeLevel(f64),

    #[error("negative wealth {0}")]
    NegativeWealth(f64),

    #[error("invalid piecewise-linear function: {0}")]
    InvalidPwl(&'static str),

    #[error("probability {0} must lie strictly between 0 and 1")]
    InvalidProbability(f64),

    #[error("returns must satisfy a1 > 0 > a2 (got a1 = {a1}, a2 = {a2})")]
    InvalidReturns { a1: f64, a2: f64 },

    #[error("exposure {exposure} at wealth {wealth} (depth {depth}) is outside [{lo}, {hi}]")]
    Inadmissible {
        depth: usize,
        wealth: f64,
        exposure: f64,
        lo: f64,
        hi: f64,
    },

    #[error("policy piece [{lo}, {hi}] at depth {depth} leaves the admissible interval")]
    InfeasiblePolicy { depth: usize, lo: f64, hi: f64 },

    #[error("{n} steps is too many for full path enumeration (limit {max})")]
    TooManySteps { n: usize, max: usize },

    #[error("path has {got} signs, expected {expected}")]
    PathLength { got: usize, expected: usize },

    #[error("policy was built for n = {policy}, requested n = {requested}")]
    StepMismatch { policy: usize, requested: usize },

    #[error("fine step {dt_fine} exceeds the resolution limit {limit} = (T/n)/64")]
    Resolution { dt_fine: f64, limit: f64 },

    #[error("simulation budget of {steps} fine steps exhausted after {exits} of {n} exits")]
    Budget { steps: usize, exits: usize, n: usize },

    #[error("at least {min} paths are required, got {got}")]
    TooFewPaths { got: usize, min: usize },
}

impl Error {
    /// Errors that come from running out of a numerical budget rather than
    /// from bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::TooManySteps { .. })
    }
}

pub type Result<T> = core::result::Result<T, Error>;
