//! Files, checkpoints, plots and the `sadkl` command-line driver around
//! `sadkl-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;
pub mod svg;

pub use error::{CliError, Result};
