//! Experiment runner: ingest, describe, encode, fine-tune, generate, evaluate.
//!
//! Each subcommand reads its declared inputs from the output directory and
//! writes its outputs there, so stages can be run one at a time or all at once
//! with `run`. Exit codes: 0 success, 2 invalid input or configuration, 3
//! runtime failure.

pub mod args;
pub mod config;
pub mod manifest;
pub mod pipeline;

use std::fmt::Display;

use tabprompt_core::codec::CodecError;
use tabprompt_core::mle::MleError;
use tabprompt_core::synth::SynthError;
use tabprompt_core::table::TableError;
use tabprompt_core::{BackendError, ProtocolError};

pub use args::{run_cli, Cli};
pub use config::PipelineConfig;
pub use manifest::RunManifest;
pub use pipeline::{cmd_describe, cmd_encode, cmd_evaluate, cmd_evaluate_files, cmd_finetune, cmd_generate, cmd_run, RunDir};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Display) -> Self {
        CliError::Validation(msg.to_string())
    }

    pub fn runtime(msg: impl Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<TableError> for CliError {
    fn from(e: TableError) -> Self {
        CliError::validation(e)
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::validation(e)
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Endpoint(_) => CliError::runtime(e),
            _ => CliError::validation(e),
        }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) | BackendError::InvalidParams(_) => CliError::validation(e),
            _ => CliError::runtime(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Policy(_) | SynthError::Codec(_) => CliError::validation(e),
            SynthError::Backend(b) => b.into(),
            _ => CliError::runtime(e),
        }
    }
}

impl From<MleError> for CliError {
    fn from(e: MleError) -> Self {
        match e {
            MleError::Eval(_) => CliError::validation(e),
            _ => CliError::runtime(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e)
    }
}
