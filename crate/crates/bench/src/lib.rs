//! Experiment harness for `exomask-core`: TOML configs, parallel trials,
//! result files, reports, dataset caching and the verification suites
//! behind the `exomask` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

pub mod config;
pub mod datasets;
pub mod experiment;
pub mod report;
pub mod verify;

pub use exomask_core;

pub use config::{Algorithm, ExperimentConfig, MaskChoice};
pub use experiment::{run_experiment, write_outputs, ResultRecord, RunOutput, TrialRow, WallClock};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] exomask_core::Error),

    #[error("{0}")]
    Verification(String),
}

impl BenchError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        BenchError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Stable identifier for the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "config",
            BenchError::Io { .. } => "io",
            BenchError::Format { .. } => "format",
            BenchError::Core(e) => e.kind(),
            BenchError::Verification(_) => "verification-failed",
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
