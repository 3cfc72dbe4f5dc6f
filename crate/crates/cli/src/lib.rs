//! Library side of the `proxylab` command-line tool.
//!
//! Every verb is a plain function over a [`RunConfig`](config::RunConfig), so
//! the binary stays a thin argument parser and the same code paths are
//! reachable from tests.

pub mod commands;
pub mod config;
pub mod error;
pub mod stats;

pub use config::RunConfig;
pub use error::{CliError, Result};
