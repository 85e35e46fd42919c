//! Batch experiment driver for the fractional-program solver toolkit:
//! configuration parsing, named presets, and the `gen` / `solve` / `bench` /
//! `metrics` operations. The binary in `main.rs` is a thin wrapper over this
//! library so the whole pipeline is exercisable from tests.

pub mod commands;
pub mod config;

/// Driver-level error, mapped onto process exit codes by the binary:
/// configuration problems exit 2, model violations exit 3, anything else 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Model(String),
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Model(m) => write!(f, "model violation: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}
