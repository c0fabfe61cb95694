//! Datasets, synthetic generation, label-skew partitioning and CSV ingestion.

mod csv_io;
mod dataset;
mod partition;
mod synthetic;

pub use csv_io::{load_csv_dataset, write_csv_dataset, CsvOptions};
pub use dataset::Dataset;
pub use partition::{
    partition_heterogeneous, ClientShard, Partition, PartitionSpec, ShardManifestEntry,
    ShortfallPolicy, Substitution,
};
pub use synthetic::{gen_synthetic_classification, split_train_test};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "client {client} needs {needed} samples of home class {class} but only {available} remain"
    )]
    HomeLabelShortfall {
        class: usize,
        client: usize,
        needed: usize,
        available: usize,
    },
    #[error("schema error: column `{column}` not found")]
    MissingColumn { column: String },
    #[error("parse error at row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
