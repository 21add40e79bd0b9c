//! Library side of the `mva` binary, shared with the integration tests.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod report;

pub use error::{CliError, Result};
