//! Scenario files, batch runs and the command-line front end of the flow.

pub mod config;
pub mod error;
pub mod run;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};
