//! File formats, run configuration, experiment pipelines and the `fracdyn`
//! command line, on top of `fracdyn-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod pipeline;

pub use error::{CliError, Result};
