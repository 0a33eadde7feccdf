//! Minimal shortfall risk and optimal partial hedges for game (Israeli) and
//! American options on n-step Cox–Ross–Rubinstein lattices.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation; configuration files, CSV/JSON output, the command line and the
//! multi-threaded Monte Carlo driver live in the `shortfall` crate.
//!
//! The pipeline:
//!
//! 1. [`market::CrrModel`] turns Black–Scholes parameters into the n-step
//!    binomial approximation.
//! 2. [`payoff::discretize`] evaluates a path functional pair `(F, Δ)` on the
//!    step paths of the lattice, giving discounted low/high payoffs per node.
//! 3. [`risk::solve`] runs the backward recursion on value functions of
//!    wealth, each an exact [`pwl::PwlFn`], and records the optimal exposure
//!    rule and stopping regions in a [`risk::PolicyTable`].
//! 4. [`hedge`] replays a policy along sign paths and takes exact
//!    expectations by enumeration; [`embed`] lifts it onto simulated Brownian
//!    paths through first-exit times.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod embed;
mod error;
pub mod hedge;
pub mod lattice;
pub mod market;
mod math;
pub mod payoff;
pub mod pwl;
pub mod risk;
mod tree;

pub use error::{Error, Result};
pub use lattice::Lattice;
pub use market::{CrrModel, MarketParams, PathNode, Sign};
pub use payoff::{Builtin, DiscretePayoffs, PathView, Payoff};
pub use pwl::{AffinePolicyPiece, CandidateKind, PwlFn};
pub use risk::{PolicyTable, RiskReport, Solution, Style, ValueTable};
