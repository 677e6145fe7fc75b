//! Experiment runner and statistics layer for the watermarking workspace.
//!
//! Experiments are declared in TOML (or picked from built-in presets), run
//! against the core crate, and emit machine-readable reports: a JSON file
//! with the full record and a CSV metric table. Every verdict names the
//! bound it checks; identical configurations (seeds included) reproduce
//! identical metric values bit for bit.

pub mod config;
pub mod experiments;
pub mod presets;
pub mod report;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tokmark_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("toml error: {0}")]
    Toml(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
