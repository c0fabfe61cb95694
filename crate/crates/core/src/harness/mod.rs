//! Command-line experiment runner: config files, single runs, variant
//! comparisons, parameter sweeps, channel verification and plot data.

mod config;
mod plot;
mod run;
mod sweep;
mod verify;

pub use config::{parse_config, validate_sweep, ConfigFile, SweepAxis, SweepSpec};
pub use plot::{cli_emit_plot_data, PlotSummary};
pub use run::{
    cli_compare, cli_run, config_hash, load_config, run_to_dir, CompareOutcome, CompareRow, RunManifest, RunOutcome,
    SweepCell, MANIFEST_SCHEMA_VERSION,
};
pub use sweep::{cli_sweep, run_sweep, SweepOutcome, SweepRow};
pub use verify::{cli_verify_channel, verify_channel, PathReport, VerifyConfig, VerifyReport};

use std::path::PathBuf;
use thiserror::Error;

use crate::channel::ChannelError;
use crate::datagen::DataError;
use crate::protocol::ProtocolError;
use crate::Error;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "OTA_FL_SIM_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("conflicting settings: {0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
}

/// Output root: the explicit flag, else `$OTA_FL_SIM_OUT`, else `runs`.
pub fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Process exit code for an error.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_INVALID,
        Error::Protocol(ProtocolError::InvalidConfig { .. }) => EXIT_INVALID,
        Error::Protocol(ProtocolError::Diverged { .. }) => EXIT_DIVERGED,
        Error::Protocol(ProtocolError::Data(d)) | Error::Data(d) => match d {
            DataError::Io { .. } | DataError::Csv(_) => EXIT_FAILURE,
            _ => EXIT_INVALID,
        },
        Error::Protocol(ProtocolError::Channel(ChannelError::InvalidArgument(_))) => EXIT_INVALID,
        Error::Channel(ChannelError::InvalidArgument(_)) => EXIT_INVALID,
        _ => EXIT_FAILURE,
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> crate::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub(crate) fn create_dir(path: &std::path::Path) -> crate::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn thread_pool(jobs: usize) -> crate::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(ConfigError::Invalid(format!("cannot start {jobs} workers: {e}"))))
}
