//! The analog multiple-access channel.
//!
//! Clients scale their model update `Δ_k = θ_k − θ̃ᵗ⁻¹` by `√pᵗ` and transmit
//! simultaneously; the server receives the sum plus white Gaussian noise and
//! divides by `K√pᵗ` (or `K̂√pᵗ`, or `r̂|Kᵗ|√pᵗ` under fading) to recover the
//! average model with additive noise.
//!
//! Under block fading the default simulation works directly with the
//! post-inversion received contributions `r̂√pᵗΔ_k` of the clients whose
//! channel magnitude exceeds `r̂`. [`BasebandMode::Complex`] instead runs the
//! full complex baseband chain and exists to cross-check that shortcut.

mod baseband;
mod fading;

pub use baseband::{apply_channel, encode_fading_complex, mac_superpose_complex};
pub use fading::{
    draw_fading, participation_probability, threshold_for_expected_participation, FadingDraw,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::ParamVector;
use crate::rng::rng_from_seed;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("all model updates are zero; the precoding factor is undefined")]
    DegenerateUpdate,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no client is above the fading threshold")]
    NoParticipants,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// How the precoding factor `pᵗ` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecodingMode {
    /// Computed from the current round's actual update norms.
    #[default]
    Oracle,
    /// Computed from the previous round's update norms.
    Delayed,
    /// `pᵗ = 1`.
    Unit,
}

/// Simulation of the fading channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasebandMode {
    /// Received contributions are computed after channel inversion.
    #[default]
    Real,
    /// Complex transmit signals are passed through `r e^{jΩ}`.
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Transmit power budget `P`.
    pub power: f64,
    /// Noise variance `σ²` per coordinate.
    pub sigma2: f64,
    pub fading: bool,
    /// Participation threshold `r̂`; only used with fading.
    pub r_hat: f64,
    pub precoding: PrecodingMode,
    #[serde(default)]
    pub baseband: BasebandMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            power: 1.0,
            sigma2: 0.0,
            fading: false,
            r_hat: 0.0,
            precoding: PrecodingMode::Oracle,
            baseband: BasebandMode::Real,
        }
    }
}

impl ChannelConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(ChannelError::InvalidArgument(format!(
                "power P must be positive, got {}",
                self.power
            )));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(ChannelError::InvalidArgument(format!(
                "noise variance must be non-negative, got {}",
                self.sigma2
            )));
        }
        if self.fading && !(self.r_hat > 0.0 && self.r_hat.is_finite()) {
            return Err(ChannelError::InvalidArgument(format!(
                "fading requires r_hat > 0, got {}",
                self.r_hat
            )));
        }
        Ok(())
    }

    /// SNR `τ = P/(dσ²)` for a model of dimension `d`.
    pub fn snr(&self, d: usize) -> f64 {
        snr(self.power, d, self.sigma2)
    }
}

/// Result of one over-the-air aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelOutput {
    pub y: Vec<f64>,
    pub p_t: f64,
    /// Client ids whose signals reached the server, ascending.
    pub participants: Vec<usize>,
    pub noise_seed: u64,
    /// `‖x_k‖²` of each participant, aligned with `participants`.
    pub transmit_energy: Vec<f64>,
}

/// `pᵗ = P / Σ_k q_k‖Δ_k‖²`.
pub fn compute_precoding_factor(norms_sq: &[f64], q: &[f64], power: f64) -> Result<f64, ChannelError> {
    if norms_sq.len() != q.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: q.len(),
            got: norms_sq.len(),
        });
    }
    if norms_sq.is_empty() {
        return Err(ChannelError::InvalidArgument("no update norms".into()));
    }
    if !(power > 0.0) {
        return Err(ChannelError::InvalidArgument(format!("power must be positive, got {power}")));
    }
    let denom: f64 = norms_sq.iter().zip(q).map(|(n, w)| w * n).sum();
    if !denom.is_finite() {
        return Err(ChannelError::InvalidState("non-finite update norm".into()));
    }
    if denom <= 0.0 {
        return Err(ChannelError::DegenerateUpdate);
    }
    Ok(power / denom)
}

fn update(theta_k: &[f64], theta_prev: &[f64]) -> Result<Vec<f64>, ChannelError> {
    if theta_k.len() != theta_prev.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: theta_prev.len(),
            got: theta_k.len(),
        });
    }
    let delta: Vec<f64> = theta_k.iter().zip(theta_prev).map(|(a, b)| a - b).collect();
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(ChannelError::InvalidState("non-finite model update".into()));
    }
    Ok(delta)
}

fn check_p(p_t: f64) -> Result<(), ChannelError> {
    if p_t > 0.0 && p_t.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::InvalidArgument(format!("precoding factor must be positive, got {p_t}")))
    }
}

/// `x = √pᵗ(θ_k − θ̃ᵗ⁻¹)`.
pub fn encode(theta_k: &[f64], theta_prev: &[f64], p_t: f64) -> Result<Vec<f64>, ChannelError> {
    check_p(p_t)?;
    let s = p_t.sqrt();
    let mut x = update(theta_k, theta_prev)?;
    x.iter_mut().for_each(|v| *v *= s);
    Ok(x)
}

/// Received contribution of a client under truncated channel inversion:
/// `r̂√pᵗΔ` when `r > r̂`, `None` otherwise.
pub fn encode_fading(
    theta_k: &[f64],
    theta_prev: &[f64],
    p_t: f64,
    draw: &FadingDraw,
    r_hat: f64,
) -> Result<Option<Vec<f64>>, ChannelError> {
    check_p(p_t)?;
    if !draw.participates(r_hat) {
        return Ok(None);
    }
    let s = r_hat * p_t.sqrt();
    let mut x = update(theta_k, theta_prev)?;
    x.iter_mut().for_each(|v| *v *= s);
    Ok(Some(x))
}

/// Transmit energy `‖x‖² = (r̂²pᵗ/r²)‖Δ‖²` of a client that inverts its channel.
pub fn fading_transmit_energy(delta_norm_sq: f64, p_t: f64, draw: &FadingDraw, r_hat: f64) -> f64 {
    r_hat * r_hat * p_t / (draw.r * draw.r) * delta_norm_sq
}

/// `y = Σ x_k + w`, `w ~ N(0, σ²I)`. Inputs are summed in the given order and
/// no noise is drawn when `σ² = 0`.
pub fn mac_superpose<R: Rng + ?Sized>(
    inputs: &[&[f64]],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<f64>, ChannelError> {
    let first = inputs
        .first()
        .ok_or_else(|| ChannelError::InvalidArgument("no channel inputs".into()))?;
    if !(sigma2 >= 0.0) {
        return Err(ChannelError::InvalidArgument(format!("negative noise variance {sigma2}")));
    }
    let mut y = first.to_vec();
    for x in &inputs[1..] {
        if x.len() != y.len() {
            return Err(ChannelError::DimensionMismatch {
                expected: y.len(),
                got: x.len(),
            });
        }
        y.iter_mut().zip(x.iter()).for_each(|(a, b)| *a += b);
    }
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        for v in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
    Ok(y)
}

fn decode_scaled(y: &[f64], scale: f64, theta_prev: &[f64]) -> Result<ParamVector, ChannelError> {
    if y.len() != theta_prev.len() {
        return Err(ChannelError::DimensionMismatch {
            expected: theta_prev.len(),
            got: y.len(),
        });
    }
    Ok(ParamVector::from_vec(
        y.iter().zip(theta_prev).map(|(v, p)| v / scale + p).collect(),
    ))
}

/// `θ̃ᵗ = y/(K√pᵗ) + θ̃ᵗ⁻¹`.
pub fn decode_full(y: &[f64], k: usize, p_t: f64, theta_prev: &[f64]) -> Result<ParamVector, ChannelError> {
    if k == 0 {
        return Err(ChannelError::InvalidArgument("client count must be positive".into()));
    }
    check_p(p_t)?;
    decode_scaled(y, k as f64 * p_t.sqrt(), theta_prev)
}

/// `θ̃ᵗ = y/(K̂√pᵗ) + θ̃ᵗ⁻¹`.
pub fn decode_partial(y: &[f64], k_hat: usize, p_t: f64, theta_prev: &[f64]) -> Result<ParamVector, ChannelError> {
    decode_full(y, k_hat, p_t, theta_prev)
}

/// `θ̃ᵗ = y/(r̂|Kᵗ|√pᵗ) + θ̃ᵗ⁻¹`.
pub fn decode_fading(
    y: &[f64],
    r_hat: f64,
    k_count: usize,
    p_t: f64,
    theta_prev: &[f64],
) -> Result<ParamVector, ChannelError> {
    if k_count == 0 {
        return Err(ChannelError::NoParticipants);
    }
    if !(r_hat > 0.0) {
        return Err(ChannelError::InvalidArgument(format!("r_hat must be positive, got {r_hat}")));
    }
    check_p(p_t)?;
    decode_scaled(y, r_hat * k_count as f64 * p_t.sqrt(), theta_prev)
}

/// Per-coordinate variance of the decoded noise for `k` effective
/// participants; `r_hat` is 1 without fading.
pub fn decoded_noise_variance(sigma2: f64, k: usize, p_t: f64, r_hat: f64) -> f64 {
    let kf = k as f64;
    sigma2 / (r_hat * r_hat * kf * kf * p_t)
}

/// `τ = P/(dσ²)`; `f64::INFINITY` for a noiseless channel.
pub fn snr(power: f64, d: usize, sigma2: f64) -> f64 {
    if sigma2 == 0.0 {
        f64::INFINITY
    } else {
        power / (d as f64 * sigma2)
    }
}

pub fn snr_to_db(tau: f64) -> f64 {
    10.0 * tau.log10()
}

/// Noise variance giving an SNR of `db` decibels.
pub fn sigma2_from_snr_db(power: f64, d: usize, db: f64) -> f64 {
    power / (d as f64 * 10f64.powf(db / 10.0))
}

/// One client's input to [`aggregate`].
#[derive(Debug, Clone, Copy)]
pub struct ClientUpload<'a> {
    pub client_id: usize,
    pub theta: &'a [f64],
}

/// Encodes, superposes and decodes one round.
///
/// `uploads` must be sorted by client id; superposition follows that order.
/// Without fading the decoder divides by `total_clients` when every client
/// uploads and by the number of uploads otherwise. `draws` is indexed by
/// client id and is required iff `cfg.fading`.
pub fn aggregate(
    uploads: &[ClientUpload<'_>],
    theta_prev: &[f64],
    p_t: f64,
    total_clients: usize,
    cfg: &ChannelConfig,
    draws: Option<&[FadingDraw]>,
    noise_seed: u64,
) -> Result<(ChannelOutput, ParamVector), ChannelError> {
    if uploads.is_empty() {
        return Err(ChannelError::NoParticipants);
    }
    let mut noise_rng = rng_from_seed(noise_seed);
    if !cfg.fading {
        let mut xs = Vec::with_capacity(uploads.len());
        for u in uploads {
            xs.push(encode(u.theta, theta_prev, p_t)?);
        }
        let energy = xs.iter().map(|x| crate::params::norm_sq(x)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let y = mac_superpose(&refs, cfg.sigma2, &mut noise_rng)?;
        let k = uploads.len();
        let theta = if k == total_clients {
            decode_full(&y, k, p_t, theta_prev)?
        } else {
            decode_partial(&y, k, p_t, theta_prev)?
        };
        let out = ChannelOutput {
            y,
            p_t,
            participants: uploads.iter().map(|u| u.client_id).collect(),
            noise_seed,
            transmit_energy: energy,
        };
        return Ok((out, theta));
    }

    let draws = draws.ok_or_else(|| ChannelError::InvalidArgument("fading draws missing".into()))?;
    let mut participants = Vec::new();
    let mut energy = Vec::new();
    let mut contributions = Vec::new();
    let mut complex_inputs = Vec::new();
    for u in uploads {
        let draw = draws.get(u.client_id).ok_or_else(|| {
            ChannelError::InvalidArgument(format!("no fading draw for client {}", u.client_id))
        })?;
        if !draw.participates(cfg.r_hat) {
            continue;
        }
        let delta_sq = crate::params::dist_sq(u.theta, theta_prev);
        participants.push(u.client_id);
        energy.push(fading_transmit_energy(delta_sq, p_t, draw, cfg.r_hat));
        match cfg.baseband {
            BasebandMode::Real => {
                contributions.push(encode_fading(u.theta, theta_prev, p_t, draw, cfg.r_hat)?.expect("above threshold"))
            }
            BasebandMode::Complex => {
                let x = encode_fading_complex(u.theta, theta_prev, p_t, draw, cfg.r_hat)?.expect("above threshold");
                complex_inputs.push(apply_channel(&x, draw));
            }
        }
    }
    if participants.is_empty() {
        return Err(ChannelError::NoParticipants);
    }
    let y = match cfg.baseband {
        BasebandMode::Real => {
            let refs: Vec<&[f64]> = contributions.iter().map(Vec::as_slice).collect();
            mac_superpose(&refs, cfg.sigma2, &mut noise_rng)?
        }
        BasebandMode::Complex => mac_superpose_complex(&complex_inputs, cfg.sigma2, &mut noise_rng)?
            .into_iter()
            .map(|c| c.re)
            .collect(),
    };
    let theta = decode_fading(&y, cfg.r_hat, participants.len(), p_t, theta_prev)?;
    Ok((
        ChannelOutput {
            y,
            p_t,
            participants,
            noise_seed,
            transmit_energy: energy,
        },
        theta,
    ))
}
