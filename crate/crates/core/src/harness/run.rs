use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{create_dir, parse_config, sha256_hex, thread_pool, write_json, ConfigError, ConfigFile};
use crate::diagnostics::diagnose;
use crate::model::write_checkpoint;
use crate::protocol::{
    prepare, run_experiment, DataSource, ProtocolVariant, RoundRecord, RunConfig, RunOptions, RunResult,
    ROUNDS_CSV_HEADER,
};
use crate::{Error, Result};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Position of a run inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub axis: String,
    pub value: f64,
    pub value_index: usize,
    pub repeat: usize,
}

/// Everything needed to reproduce a run. Contains no timestamps, so reruns
/// write identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub crate_version: String,
    pub config: RunConfig,
    /// Configuration after SNR resolution and variant overrides.
    pub effective_config: RunConfig,
    pub config_hash: String,
    /// SHA-256 of every input file, keyed by role.
    pub input_hashes: BTreeMap<String, String>,
    pub rounds_csv_columns: Vec<String>,
    pub rounds_completed: usize,
    pub diverged_at: Option<usize>,
    pub substitutions: Vec<crate::datagen::Substitution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<SweepCell>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub result: RunResult,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.result.diverged() {
            super::EXIT_DIVERGED
        } else {
            super::EXIT_OK
        }
    }
}

/// Short content hash of a configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("configs serialize");
    sha256_hex(&json)[..16].to_string()
}

/// Reads and parses a config file, returning it with its SHA-256.
pub fn load_config(path: &Path) -> Result<(ConfigFile, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok((parse_config(&text)?, sha256_hex(text.as_bytes())))
}

fn data_hash(cfg: &RunConfig) -> Result<Option<String>> {
    match &cfg.data {
        DataSource::Csv { path, .. } => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            Ok(Some(sha256_hex(&bytes)))
        }
        DataSource::Synthetic { .. } => Ok(None),
    }
}

/// Runs `cfg` and writes `rounds.csv`, `manifest.json`, `partition.json`,
/// `diagnostics.json` and the final model into `dir`.
pub fn run_to_dir(
    cfg: &RunConfig,
    dir: &Path,
    mut input_hashes: BTreeMap<String, String>,
    cell: Option<SweepCell>,
) -> Result<RunOutcome> {
    if let Some(h) = data_hash(cfg)? {
        input_hashes.insert("data".into(), h);
    }
    let exp = prepare(cfg)?;
    let result = run_experiment(&exp, &RunOptions::default())?;
    create_dir(dir)?;

    RoundRecord::write_csv_file(&result.records, &dir.join("rounds.csv"))?;
    let partition: Vec<_> = exp
        .shards
        .iter()
        .map(|s| crate::datagen::ShardManifestEntry {
            client_id: s.client_id,
            size: s.len(),
            home_label: s.home_label,
            class_histogram: s.dataset.class_counts(),
        })
        .collect();
    write_json(&dir.join("partition.json"), &partition)?;
    match diagnose(&result.records, exp.config.channel.power) {
        Ok(report) => write_json(&dir.join("diagnostics.json"), &report)?,
        Err(e) => log::warn!("diagnostics skipped: {e}"),
    }
    write_checkpoint(dir.join("model.bin"), &result.final_theta, &result.spec)?;

    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        effective_config: result.config.clone(),
        config_hash: config_hash(cfg),
        input_hashes,
        rounds_csv_columns: ROUNDS_CSV_HEADER.iter().map(|s| s.to_string()).collect(),
        rounds_completed: result.records.len() - 1,
        diverged_at: result.diverged_at,
        substitutions: result.substitutions.clone(),
        cell,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        result,
    })
}

/// `run`: one experiment from a config file into `<out>/run-<hash>`.
pub fn cli_run(config_path: &Path, out_root: &Path, seed_override: Option<u64>) -> Result<RunOutcome> {
    let (file, file_hash) = load_config(config_path)?;
    let mut cfg = file.run;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let dir = out_root.join(format!("run-{}", config_hash(&cfg)));
    let hashes = BTreeMap::from([("config".to_string(), file_hash)]);
    let outcome = run_to_dir(&cfg, &dir, hashes, None)?;
    log::info!("wrote {}", outcome.dir.display());
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub variant: ProtocolVariant,
    pub final_accuracy: Option<f64>,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub dir: PathBuf,
    pub rows: Vec<CompareRow>,
}

/// `compare`: the same config and seed under several variants, written to
/// `<out>/compare-<hash>/<variant>` plus a `compare.csv` summary.
pub fn cli_compare(
    config_path: &Path,
    variants: &[ProtocolVariant],
    out_root: &Path,
    jobs: usize,
    seed_override: Option<u64>,
) -> Result<CompareOutcome> {
    if variants.is_empty() {
        return Err(ConfigError::Invalid("no variants to compare".into()).into());
    }
    let (file, file_hash) = load_config(config_path)?;
    let mut base = file.run;
    if let Some(seed) = seed_override {
        base.seed = seed;
    }
    base.variant = ProtocolVariant::NoRota;
    let dir = out_root.join(format!("compare-{}", config_hash(&(&base, variants))));
    // Variant overrides are applied by `prepare` once the SNR is resolved.
    let configs: Vec<RunConfig> = variants
        .iter()
        .map(|&v| RunConfig { variant: v, ..base.clone() })
        .collect();
    let pool = thread_pool(jobs)?;
    let outcomes: Vec<Result<RunOutcome>> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .map(|c| {
                let hashes = BTreeMap::from([("config".to_string(), file_hash.clone())]);
                run_to_dir(c, &dir.join(c.variant.name()), hashes, None)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for o in outcomes {
        let o = o?;
        let last = o.result.records.last().expect("initial record");
        rows.push(CompareRow {
            variant: o.result.config.variant,
            final_accuracy: o.result.final_accuracy(),
            final_loss: last.global_loss,
            final_grad_norm_sq: last.grad_norm_sq,
            diverged_at: o.result.diverged_at,
        });
    }
    let path = dir.join("compare.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["variant", "final_accuracy", "final_loss", "final_grad_norm_sq", "diverged_at"])?;
    for r in &rows {
        w.write_record([
            r.variant.name().to_string(),
            r.final_accuracy.map(|a| a.to_string()).unwrap_or_default(),
            r.final_loss.to_string(),
            r.final_grad_norm_sq.to_string(),
            r.diverged_at.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(CompareOutcome { dir, rows })
}
