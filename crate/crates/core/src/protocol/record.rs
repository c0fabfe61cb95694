use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use super::ProtocolError;

/// Column order of `rounds.csv`.
pub const ROUNDS_CSV_HEADER: [&str; 8] = [
    "t",
    "loss",
    "grad_norm_sq",
    "accuracy",
    "p_t",
    "n_participants",
    "mean_E_k",
    "mean_gamma_hat",
];

/// Metrics of one round. Round `0` describes the initial model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    /// `F(θ̃ᵗ)`.
    pub global_loss: f64,
    /// `‖∇F(θ̃ᵗ)‖²`.
    pub grad_norm_sq: f64,
    /// `(1/K) Σ_k ‖∇f_k(θ̃ᵗ)‖²`.
    pub local_grad_sq_mean: f64,
    /// `max_k ‖∇f_k(θ̃ᵗ)‖²`.
    pub max_local_grad_sq: f64,
    pub test_accuracy: Option<f64>,
    /// `None` when nothing was transmitted.
    pub p_t: Option<f64>,
    pub participants: Vec<usize>,
    /// `E_k` of every client (empty for round 0).
    pub epochs: Vec<usize>,
    /// Per-client `γ̂`, `None` for clients that did not transmit or when not
    /// tracked.
    pub gamma_hat: Vec<Option<f64>>,
    pub zeta_hat: Vec<Option<f64>>,
    /// `Σ_{k∈S} q̃_k ‖x_k‖²` with weights renormalized over the participants.
    pub transmit_power: Option<f64>,
    pub noise_seed: Option<u64>,
    pub skipped: bool,
    pub wall_ms: f64,
}

impl PartialEq for RoundRecord {
    /// Compares everything except the wall-clock time.
    fn eq(&self, o: &Self) -> bool {
        self.t == o.t
            && self.global_loss.to_bits() == o.global_loss.to_bits()
            && self.grad_norm_sq.to_bits() == o.grad_norm_sq.to_bits()
            && self.local_grad_sq_mean.to_bits() == o.local_grad_sq_mean.to_bits()
            && self.max_local_grad_sq.to_bits() == o.max_local_grad_sq.to_bits()
            && self.test_accuracy.map(f64::to_bits) == o.test_accuracy.map(f64::to_bits)
            && self.p_t.map(f64::to_bits) == o.p_t.map(f64::to_bits)
            && self.participants == o.participants
            && self.epochs == o.epochs
            && self.gamma_hat.iter().map(|g| g.map(f64::to_bits)).eq(o.gamma_hat.iter().map(|g| g.map(f64::to_bits)))
            && self.zeta_hat.iter().map(|g| g.map(f64::to_bits)).eq(o.zeta_hat.iter().map(|g| g.map(f64::to_bits)))
            && self.transmit_power.map(f64::to_bits) == o.transmit_power.map(f64::to_bits)
            && self.noise_seed == o.noise_seed
            && self.skipped == o.skipped
    }
}

impl RoundRecord {
    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    /// Mean `E_k` over all clients.
    pub fn mean_epochs(&self) -> Option<f64> {
        (!self.epochs.is_empty()).then(|| self.epochs.iter().sum::<usize>() as f64 / self.epochs.len() as f64)
    }

    /// Mean of the recorded `γ̂` values.
    pub fn mean_gamma_hat(&self) -> Option<f64> {
        let vals: Vec<f64> = self.gamma_hat.iter().flatten().copied().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn max_gamma_hat(&self) -> Option<f64> {
        self.gamma_hat.iter().flatten().copied().reduce(f64::max)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per round `t ≥ 1`.
pub fn write_rounds_csv<W: Write>(records: &[RoundRecord], out: W) -> Result<(), ProtocolError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROUNDS_CSV_HEADER)?;
    for r in records.iter().filter(|r| r.t >= 1) {
        w.write_record([
            r.t.to_string(),
            r.global_loss.to_string(),
            r.grad_norm_sq.to_string(),
            opt(r.test_accuracy),
            opt(r.p_t),
            r.n_participants().to_string(),
            opt(r.mean_epochs()),
            opt(r.mean_gamma_hat()),
        ])?;
    }
    w.flush().map_err(|source| ProtocolError::Io {
        path: "<rounds csv>".into(),
        source,
    })?;
    Ok(())
}

impl RoundRecord {
    /// Convenience wrapper writing `rounds.csv` to a path.
    pub fn write_csv_file(records: &[RoundRecord], path: &Path) -> Result<(), ProtocolError> {
        let file = std::fs::File::create(path).map_err(|source| ProtocolError::Io {
            path: path.display().to_string(),
            source,
        })?;
        write_rounds_csv(records, std::io::BufWriter::new(file))
    }
}
