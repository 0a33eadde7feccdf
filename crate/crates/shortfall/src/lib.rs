//! File formats, command line and a multi-threaded Monte Carlo driver for
//! [`shortfall_core`].

pub mod cli;
pub mod config;
pub mod mc;
pub mod report;

use std::fmt;

/// Errors surfaced by the command line.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] shortfall_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// Process exit code: 2 for bad input, 3 for an exhausted numerical
    /// budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Core(e) if e.is_budget() => 3,
            AppError::Core(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn config(msg: impl fmt::Display) -> AppError {
        AppError::Config(msg.to_string())
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;
