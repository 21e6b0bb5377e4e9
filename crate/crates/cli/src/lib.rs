//! Run configuration, file formats and pipeline commands for `negdiff`.

pub mod commands;
pub mod config;
pub mod format;

pub use commands::{cmd_bias, cmd_eval, cmd_gen_data, cmd_report, cmd_sample, cmd_train, evaluate_dataset};
pub use config::{RunConfig, SampleStrategy};
