//! Configuration, output formats and command dispatch around `fracbn-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::{Result, RunError};
