use std::path::{Path, PathBuf};

use super::{ConfigError, RunManifest};
use crate::{Error, Result};

/// What [`cli_emit_plot_data`] wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSummary {
    pub rows: usize,
    pub rounds: usize,
    pub runs: usize,
}

/// Merges `rounds.csv` of several run directories into one long-format CSV
/// `variant,round,repeat,value` for `metric` (a `rounds.csv` column). Runs
/// are truncated to the shortest one. The repeat index comes from the sweep
/// cell when present, else it counts earlier runs of the same variant.
pub fn cli_emit_plot_data(run_dirs: &[PathBuf], metric: &str, out: &Path) -> Result<PlotSummary> {
    if run_dirs.is_empty() {
        return Err(ConfigError::Invalid("no run directories given".into()).into());
    }
    let mut series = Vec::new();
    let mut seen: std::collections::BTreeMap<String, usize> = Default::default();
    for dir in run_dirs {
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|_| ConfigError::Invalid(format!("{}: no manifest.json", dir.display())))?;
        let manifest: RunManifest = serde_json::from_str(&text)?;
        let variant = manifest.effective_config.variant.name().to_string();
        let count = seen.entry(variant.clone()).or_insert(0);
        let repeat = manifest.cell.as_ref().map_or(*count, |c| c.repeat);
        *count += 1;

        let csv_path = dir.join("rounds.csv");
        let mut reader = csv::Reader::from_path(&csv_path)?;
        let column = reader
            .headers()?
            .iter()
            .position(|h| h == metric)
            .ok_or_else(|| ConfigError::InvalidValue {
                key: "metric".into(),
                message: format!("`{metric}` is not a column of {}", csv_path.display()),
            })?;
        let mut values = Vec::new();
        for row in reader.records() {
            let row = row?;
            values.push((row[0].to_string(), row[column].to_string()));
        }
        series.push((variant, repeat, values));
    }
    let rounds = series.iter().map(|s| s.2.len()).min().unwrap_or(0);
    if series.iter().any(|s| s.2.len() != rounds) {
        log::warn!("runs have different lengths; aligning to the shortest ({rounds} rounds)");
    }
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["variant", "round", "repeat", "value"])?;
    for (variant, repeat, values) in &series {
        for (t, v) in &values[..rounds] {
            w.write_record([variant.as_str(), t, &repeat.to_string(), v])?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(PlotSummary {
        rows: rounds * series.len(),
        rounds,
        runs: series.len(),
    })
}
