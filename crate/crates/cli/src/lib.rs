//! File formats and pipeline commands around `gwkae-core`.
//!
//! The `gwkae` binary exposes each stage as a subcommand:
//! `simulate`, `train`, `calibrate`, `detect`, `localize`, `evaluate`.

#![warn(missing_docs)]

/// Pipeline stages.
pub mod commands;
/// Configuration file.
pub mod config;
/// Error classification and exit codes.
pub mod error;
pub mod formats;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
