//! Experiment lifecycle for `lsl-core`: corpus generation, architecture
//! search, training, evaluation, parameter accounting and the LSL-count
//! sweep. Every command reads one experiment config and writes into a run
//! directory.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{
    cmd_eval, cmd_gen, cmd_params, cmd_search, cmd_sweep_lsl_count, cmd_train, cmd_zero_shot, parse_weights_table,
    ComparisonRow, EvalOutcome, SearchOutcome, Session, Split, SweepRow, TrainReport, ZeroShotReport,
};
pub use config::{parse_arch_file, render_arch_file, ExperimentConfig, ModelShape};
pub use manifest::{content_hash, RunDir, RunManifest};

use lsl_core::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::Contract(_) | Error::Routing(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Io(_) => EXIT_DATA,
        Error::Diverged { .. } | Error::NonFinite { .. } | Error::Shape { .. } => EXIT_NUMERIC,
    }
}
