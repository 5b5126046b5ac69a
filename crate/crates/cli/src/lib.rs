//! Command-line front end: `run`, `diagnose` and `estimate`.

pub mod config;
pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod io;
pub mod run;

pub use error::{CliError, CliResult};
