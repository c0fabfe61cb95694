//! Analysis-side measurements over training state and round records.
//!
//! Everything here is read-only: diagnostics never touch the RNG streams or
//! parameters of a run.

mod envelope;
mod rate;

pub use envelope::{estimate_bh, LgdEstimate, LgdPoint};
pub use rate::{fit_rate, fit_rate_series, RateFit, RateMetric, RateOptions, Smoothing};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{ClientShard, Dataset};
use crate::model::{local_loss_grad, ModelError, ModelSpec};
use crate::params::{norm_sq, ParamVector};
use crate::protocol::RoundRecord;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Global objective and gradient statistics at one parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalStats {
    /// `F(θ) = (1/K) Σ f_k(θ)`.
    pub loss: f64,
    /// `‖∇F(θ)‖²`.
    pub grad_norm_sq: f64,
    /// `(1/K) Σ ‖∇f_k(θ)‖²`.
    pub local_grad_sq_mean: f64,
    /// `max_k ‖∇f_k(θ)‖²`.
    pub max_local_grad_sq: f64,
}

/// Evaluates every client's loss and gradient (in parallel) and reduces them
/// in client order.
pub fn global_stats(theta: &[f64], shards: &[ClientShard], spec: &ModelSpec) -> Result<GlobalStats, DiagnosticsError> {
    if shards.is_empty() {
        return Err(DiagnosticsError::InvalidArgument("no client shards".into()));
    }
    let per_client: Vec<(f64, ParamVector)> = shards
        .par_iter()
        .map(|s| local_loss_grad(theta, &s.dataset, spec))
        .collect::<Result<_, _>>()?;
    let k = per_client.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    let mut sq_sum = 0.0;
    let mut sq_max = 0.0f64;
    for (l, g) in &per_client {
        loss += l;
        grad.iter_mut().zip(g.iter()).for_each(|(a, b)| *a += b);
        let sq = g.norm_sq();
        sq_sum += sq;
        sq_max = sq_max.max(sq);
    }
    grad.iter_mut().for_each(|v| *v /= k);
    Ok(GlobalStats {
        loss: loss / k,
        grad_norm_sq: norm_sq(&grad),
        local_grad_sq_mean: sq_sum / k,
        max_local_grad_sq: sq_max,
    })
}

/// `‖∇F(θ)‖²` with `∇F = (1/K) Σ ∇f_k`.
pub fn global_grad_norm_sq(theta: &[f64], shards: &[ClientShard], spec: &ModelSpec) -> Result<f64, DiagnosticsError> {
    Ok(global_stats(theta, shards, spec)?.grad_norm_sq)
}

/// Fraction of test samples whose argmax prediction is correct.
pub fn evaluate_accuracy(theta: &[f64], test: &Dataset, spec: &ModelSpec) -> Result<f64, DiagnosticsError> {
    if test.is_empty() {
        return Err(DiagnosticsError::InvalidArgument("empty test set".into()));
    }
    spec.check_inputs(theta, test)?;
    let correct = (0..test.len())
        .filter(|&i| spec.predict(theta, test.row(i)) == test.label(i))
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Outcome of a per-round precoding bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Fraction of checked rounds satisfying the bound (1 when none checked).
    pub fraction: f64,
    pub checked: usize,
    pub violating_rounds: Vec<usize>,
}

fn bound_check<F: Fn(&RoundRecord, &RoundRecord) -> f64>(records: &[RoundRecord], bound: F) -> BoundCheck {
    let mut checked = 0;
    let mut violating = Vec::new();
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let Some(p) = cur.p_t else { continue };
        checked += 1;
        let limit = bound(prev, cur);
        if 1.0 / p > limit * (1.0 + 1e-12) {
            violating.push(cur.t);
        }
    }
    let fraction = if checked == 0 {
        1.0
    } else {
        (checked - violating.len()) as f64 / checked as f64
    };
    BoundCheck {
        fraction,
        checked,
        violating_rounds: violating,
    }
}

/// Checks `1/pᵗ ≤ (B̂²‖∇F(θ̃ᵗ⁻¹)‖² + Ĥ²)/P` on every transmitting round.
/// `records` must be consecutive and start with the initial evaluation.
pub fn check_precoding_bound(records: &[RoundRecord], b_hat: f64, h_hat: f64, power: f64) -> BoundCheck {
    bound_check(records, |prev, _| (b_hat * b_hat * prev.grad_norm_sq + h_hat * h_hat) / power)
}

/// Checks `1/pᵗ ≤ Ĝ²/P` with `Ĝ²` the largest squared local gradient norm
/// seen in `records`.
pub fn check_gradient_bound(records: &[RoundRecord], power: f64) -> BoundCheck {
    let g_sq = records.iter().map(|r| r.max_local_grad_sq).fold(0.0, f64::max);
    bound_check(records, |_, _| g_sq / power)
}

/// Smallest λ for which the precoding bound is guaranteed:
/// `γ̂ L / (K √τ)`.
pub fn lambda_threshold(gamma_max: f64, smoothness: f64, clients: usize, tau: f64) -> f64 {
    gamma_max * smoothness / (clients as f64 * tau.sqrt())
}

/// `(E_k‖∇f_k‖², ‖∇F‖²)` samples from a run's records.
pub fn lgd_points(records: &[RoundRecord]) -> Vec<LgdPoint> {
    records
        .iter()
        .map(|r| LgdPoint {
            global_sq: r.grad_norm_sq,
            local_mean_sq: r.local_grad_sq_mean,
        })
        .collect()
}

/// Largest per-client `γ̂` across all rounds.
pub fn max_gamma_hat(records: &[RoundRecord]) -> Option<f64> {
    records
        .iter()
        .flat_map(|r| r.gamma_hat.iter().flatten().copied())
        .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    #[serde(rename = "H_hat")]
    pub h_hat: f64,
    pub bound_satisfaction: f64,
    pub rate_slope: f64,
    pub r2: f64,
}

/// Envelope, bound check and rate fit of one run.
pub fn diagnose(records: &[RoundRecord], power: f64) -> Result<DiagnosticsReport, DiagnosticsError> {
    let lgd = estimate_bh(&lgd_points(records))?;
    let bound = check_precoding_bound(records, lgd.b_hat, lgd.h_hat, power);
    let rate = fit_rate(records, RateMetric::GradNormSq, &RateOptions::default())?;
    Ok(DiagnosticsReport {
        b_hat: lgd.b_hat,
        h_hat: lgd.h_hat,
        bound_satisfaction: bound.fraction,
        rate_slope: rate.slope,
        r2: rate.r2,
    })
}
