//! Config-driven pipeline behind the `manifold-kc` binary: `atlas` builds
//! and checks a chart cover, `sample` draws nested grid samples, `verify`
//! runs the statistical checks, `report` pretty-prints the outputs.
//!
//! Exit codes: 0 all checks pass, 1 usage or I/O error, 2 check failure,
//! 3 model rejection.

mod commands;
mod config;
mod report;

pub use commands::{cmd_atlas, cmd_report, cmd_sample, cmd_verify, CommandOutcome};
pub use config::{
    AtlasSection, GridSection, ModelSection, OutputSection, RateSection, RunConfig, RunSection,
    Validated, VerifySection, CONFIG_SCHEMA_VERSION,
};
pub use report::print_reports;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_MODEL_REJECTED: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Atlas(#[from] crate::atlas::AtlasError),
    #[error(transparent)]
    Field(#[from] crate::fields::FieldError),
    #[error(transparent)]
    Verify(#[from] crate::verify::VerifyError),
}

impl PipelineError {
    /// Exit code for a failed command.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Field(crate::fields::FieldError::ModelRejection { .. }) => {
                EXIT_MODEL_REJECTED
            }
            _ => EXIT_USAGE,
        }
    }
}

/// Exit code for a finished command.
pub fn exit_code(result: &Result<CommandOutcome, PipelineError>) -> i32 {
    match result {
        Ok(outcome) if outcome.pass => EXIT_OK,
        Ok(_) => EXIT_CHECK_FAILED,
        Err(e) => e.exit_code(),
    }
}
