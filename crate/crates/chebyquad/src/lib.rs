//! File formats, configuration, parallel drivers and the command-line
//! interface around `chebyquad-core`.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod parallel;

pub use error::{CliError, Result};
