//! Scenario runner: TOML configs and presets in, CSV time series and a JSON
//! summary out.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

use thiserror::Error;

pub use config::ScenarioConfig;
pub use run::{run_scenario, ScenarioOutput, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("{0} invariant violations")]
    Violations(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Integration(_) | CliError::Evaluation(_) => 2,
            CliError::Violations(_) => 3,
        }
    }
}
