//! Round orchestration.
//!
//! A round broadcasts the global model, lets each participating client run
//! `E_k` epochs of SGD on its proximal objective, aggregates the updates over
//! the channel and records global metrics. Every baseline is the same loop
//! with a different configuration, see [`variant_config`].

mod config;
mod participation;
mod record;
mod runner;

pub use config::{variant_config, DataSource, ParticipationMode, ProtocolVariant, RunConfig, StragglerModel, StragglerPolicy};
pub use participation::{assign_stragglers, select_participants};
pub use record::{write_rounds_csv, RoundRecord, ROUNDS_CSV_HEADER};
pub use runner::{prepare, run_experiment, run_round, run_training, run_training_with, Experiment, RunOptions, RunResult, TrainingState};

use thiserror::Error;

use crate::channel::ChannelError;
use crate::datagen::DataError;
use crate::diagnostics::DiagnosticsError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("training diverged in round {round}: {reason}")]
    Diverged { round: usize, reason: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ProtocolError {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        ProtocolError::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
