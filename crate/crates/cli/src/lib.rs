//! Pipelines, configuration and outputs behind the `xplab` command.

pub mod cli;
pub mod config;
pub mod output;
pub mod pipelines;
pub mod plot;
pub mod run;

pub use config::{load, Loaded, Pipeline, RunConfig};
pub use run::{run_pipeline, RunError, RunOptions};
