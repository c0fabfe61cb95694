use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{config_hash, load_config, run_to_dir, thread_pool, ConfigError, SweepCell, SweepSpec};
use crate::protocol::{ProtocolVariant, RunConfig};
use crate::rng::{mix_seed, Stream};
use crate::{Error, Result};

/// Rounds at the end of a run summarized in sweep rows.
const FINAL_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub repeat: usize,
    pub variant: ProtocolVariant,
    pub seed: u64,
    pub final_accuracy: Option<f64>,
    pub final_loss: f64,
    /// Mean `‖∇F‖²` over the last rounds.
    pub window_grad_norm_sq: f64,
    /// Mean accuracy over the evaluated last rounds.
    pub window_accuracy: Option<f64>,
    pub diverged_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub rows: Vec<SweepRow>,
}

/// Seed of sweep cell `(value_index, repeat)`; variants inside a cell share it.
pub fn cell_seed(master: u64, value_index: usize, repeat: usize) -> u64 {
    mix_seed(&[master, Stream::Sweep as u64, value_index as u64, repeat as u64])
}

fn cell_dir(dir: &Path, spec: &SweepSpec, vi: usize, repeat: usize, variant: ProtocolVariant) -> PathBuf {
    dir.join(format!("{}-{vi}-r{repeat}-{}", spec.axis.name(), variant.name()))
}

/// Runs every `(value, repeat, variant)` cell on `jobs` workers and writes
/// `sweep.csv` in cell order.
pub fn run_sweep(spec: &SweepSpec, dir: &Path, jobs: usize, input_hashes: BTreeMap<String, String>) -> Result<SweepOutcome> {
    super::validate_sweep(spec)?;
    let mut cells = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for repeat in 0..spec.repeats {
            for &variant in &spec.variants {
                let mut cfg = RunConfig {
                    variant,
                    seed: cell_seed(spec.base.seed, vi, repeat),
                    ..spec.base.clone()
                };
                spec.axis.apply(&mut cfg, value);
                let cell = SweepCell {
                    axis: spec.axis.name().to_string(),
                    value,
                    value_index: vi,
                    repeat,
                };
                cells.push((cfg, cell, cell_dir(dir, spec, vi, repeat, variant)));
            }
        }
    }
    let pool = thread_pool(jobs)?;
    let outcomes: Vec<Result<_>> = pool.install(|| {
        cells
            .par_iter()
            .map(|(cfg, cell, path)| run_to_dir(cfg, path, input_hashes.clone(), Some(cell.clone())))
            .collect()
    });
    let mut rows = Vec::with_capacity(cells.len());
    for ((cfg, cell, _), outcome) in cells.iter().zip(outcomes) {
        let o = outcome?;
        let records = &o.result.records[1..];
        let window = &records[records.len().saturating_sub(FINAL_WINDOW)..];
        let accs: Vec<f64> = window.iter().filter_map(|r| r.test_accuracy).collect();
        let last = o.result.records.last().expect("initial record");
        rows.push(SweepRow {
            axis: cell.axis.clone(),
            value: cell.value,
            repeat: cell.repeat,
            variant: cfg.variant,
            seed: cfg.seed,
            final_accuracy: o.result.final_accuracy(),
            final_loss: last.global_loss,
            window_grad_norm_sq: if window.is_empty() {
                last.grad_norm_sq
            } else {
                window.iter().map(|r| r.grad_norm_sq).sum::<f64>() / window.len() as f64
            },
            window_accuracy: (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64),
            diverged_at: o.result.diverged_at,
        });
    }
    write_rows(&dir.join("sweep.csv"), &rows)?;
    Ok(SweepOutcome {
        dir: dir.to_path_buf(),
        rows,
    })
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "axis",
        "value",
        "repeat",
        "variant",
        "seed",
        "final_accuracy",
        "final_loss",
        "window_grad_norm_sq",
        "window_accuracy",
        "diverged_at",
    ])?;
    for r in rows {
        w.write_record([
            r.axis.clone(),
            r.value.to_string(),
            r.repeat.to_string(),
            r.variant.name().to_string(),
            r.seed.to_string(),
            opt(r.final_accuracy),
            r.final_loss.to_string(),
            r.window_grad_norm_sq.to_string(),
            opt(r.window_accuracy),
            r.diverged_at.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `sweep`: runs the sweep described by a config file into
/// `<out>/sweep-<hash>`.
pub fn cli_sweep(config_path: &Path, out_root: &Path, jobs: usize, seed_override: Option<u64>) -> Result<SweepOutcome> {
    let (file, file_hash) = load_config(config_path)?;
    let mut spec = file
        .sweep
        .ok_or_else(|| ConfigError::Missing("sweep.axis".into()))?;
    if let Some(seed) = seed_override {
        spec.base.seed = seed;
    }
    let dir = out_root.join(format!("sweep-{}", config_hash(&spec)));
    super::create_dir(&dir)?;
    run_sweep(&spec, &dir, jobs, BTreeMap::from([("config".to_string(), file_hash)]))
}
