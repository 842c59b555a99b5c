//! File formats and configuration for the `qsync` command-line tool.

pub mod config;
pub mod formats;
