//! Pipeline orchestration for the dialex toolkit: configuration, a synthetic
//! dialect generator, stage runners that read and write artifacts on disk,
//! and the command-line front end.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod pipeline;
pub mod synthetic;

use std::path::PathBuf;

/// Exit status for a validation failure (bad config, missing input).
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for a stage that failed while running.
pub const EXIT_STAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("missing input file {0}")]
    MissingInput(PathBuf),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::MissingInput(_) => EXIT_VALIDATION,
            CliError::Stage { .. } => EXIT_STAGE,
        }
    }

    pub fn stage<E>(stage: &'static str, e: E) -> Self
    where
        E: Into<Box<dyn std::error::Error + Send + Sync>>,
    {
        CliError::Stage {
            stage,
            source: e.into(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
