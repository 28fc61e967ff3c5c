//! Command-line front end for `layerdyn-core`: run the bundled scenarios,
//! sweep parameters and write trajectories as CSV or JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
