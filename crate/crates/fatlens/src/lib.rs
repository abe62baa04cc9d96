//! Pipeline stages, file formats and the command-line interface built on
//! `fatlens-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod http;
pub mod ingest;
pub mod manifest;
pub mod report;
pub mod stages;

pub use config::RunConfig;
pub use error::{exit, CliError, Result};
