//! File formats, a thread-pool runner and the `pas` command line on top of `pas-core`.

pub mod cli;
pub mod error;
pub mod fmt;
pub mod io;
pub mod runner;

pub use error::{CliError, ExitCode};
pub use runner::RayonRunner;
