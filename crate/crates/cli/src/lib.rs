//! Command-line front end for `lanczos-net`.

pub mod config;
pub mod error;
pub mod run;
pub mod sbm;
pub mod tools;

pub use config::{DataSource, RunConfig, TrainSettings};
pub use error::{CliError, CliResult};
pub use sbm::{SbmData, SbmSpec};
