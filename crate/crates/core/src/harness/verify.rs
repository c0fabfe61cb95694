//! Monte-Carlo check of the decoded-noise laws, run through the same
//! encode, superpose and decode functions used in training.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::channel::{
    aggregate, compute_precoding_factor, decoded_noise_variance, draw_fading, encode, participation_probability,
    threshold_for_expected_participation, ChannelConfig, ChannelError, ClientUpload,
};
use crate::protocol::RunConfig;
use crate::rng::{stream_rng, stream_seed, Stream};
use crate::Result;

/// Smallest accepted trial count.
pub const MIN_TRIALS: usize = 10_000;
/// Largest accepted relative deviation of a noise variance.
pub const VARIANCE_TOLERANCE: f64 = 0.05;
/// Largest accepted relative deviation of the mean participation.
pub const PARTICIPATION_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    /// Model dimension of the simulated updates.
    pub dim: usize,
    pub sigma2: f64,
    pub power: f64,
    pub p_t: f64,
    /// `K` of the full-participation path.
    pub clients: usize,
    /// `K` and `K̂` of the partial path.
    pub partial_clients: usize,
    pub k_hat: usize,
    /// `K` and `r̂` of the fading path.
    pub fading_clients: usize,
    pub r_hat: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 100_000,
            seed: 0,
            dim: 1,
            sigma2: 1.0,
            power: 1.0,
            p_t: 0.25,
            clients: 3,
            partial_clients: 4,
            k_hat: 2,
            fading_clients: 30,
            r_hat: threshold_for_expected_participation(30, 20.0),
        }
    }
}

impl VerifyConfig {
    /// Channel settings of a run config: `K`, `K̂`, `σ²` (an SNR is converted
    /// with `d = 1`), `P` and `r̂` when fading is on.
    pub fn from_run_config(rc: &RunConfig) -> Self {
        let mut v = VerifyConfig {
            seed: rc.seed,
            power: rc.channel.power,
            sigma2: match rc.snr_db {
                Some(db) => crate::channel::sigma2_from_snr_db(rc.channel.power, 1, db),
                None => rc.channel.sigma2,
            },
            clients: rc.clients,
            partial_clients: rc.clients,
            k_hat: rc.clients_per_round.unwrap_or(rc.clients.div_ceil(2)),
            fading_clients: rc.clients,
            r_hat: threshold_for_expected_participation(rc.clients, rc.clients as f64 * 2.0 / 3.0),
            ..Default::default()
        };
        if rc.channel.fading {
            v.r_hat = rc.channel.r_hat;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub name: String,
    /// Theoretical per-coordinate variance; for the fading path both values
    /// are normalized by the per-trial law, so the target is 1.
    pub theoretical: f64,
    pub measured: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub paths: Vec<PathReport>,
    /// `|Σ q_k‖x_k‖² − P| / P` under oracle precoding.
    pub power_residual: f64,
    pub expected_participants: f64,
    pub mean_participants: f64,
    pub participation_deviation: f64,
    pub passed: bool,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            super::EXIT_OK
        } else {
            super::EXIT_FAILURE
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<10} {:>14} {:>14} {:>10}\n", "path", "theory", "measured", "deviation");
        for p in &self.paths {
            s += &format!("{:<10} {:>14.6e} {:>14.6e} {:>9.3}%\n", p.name, p.theoretical, p.measured, 100.0 * p.deviation);
        }
        s += &format!("power residual        {:.3e}\n", self.power_residual);
        s += &format!(
            "participation         {:.4} of {:.4} expected ({:.3}%)\n",
            self.mean_participants,
            self.expected_participants,
            100.0 * self.participation_deviation
        );
        s += if self.passed { "PASS\n" } else { "FAIL\n" };
        s
    }
}

fn deviation(measured: f64, theory: f64) -> f64 {
    if theory == 0.0 {
        if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (measured / theory - 1.0).abs()
    }
}

fn client_models(k: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Stream::Init, 0, 1);
    (0..k)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Mean squared decoded noise over all trials and coordinates, measured as
/// the difference to the same round over a noiseless channel.
fn noise_path(
    cfg: &VerifyConfig,
    path: u64,
    total: usize,
    uploaded: usize,
    fading: bool,
    participants: &mut Vec<usize>,
) -> std::result::Result<(f64, f64), ChannelError> {
    let models = client_models(total, cfg.dim, cfg.seed);
    let prev = vec![0.0; cfg.dim];
    let uploads: Vec<ClientUpload> = models[..uploaded]
        .iter()
        .enumerate()
        .map(|(k, m)| ClientUpload { client_id: k, theta: m })
        .collect();
    let noisy = ChannelConfig {
        power: cfg.power,
        sigma2: cfg.sigma2,
        fading,
        r_hat: cfg.r_hat,
        ..Default::default()
    };
    let clean = ChannelConfig { sigma2: 0.0, ..noisy.clone() };
    let (mut sum_sq, mut sum_norm, mut count) = (0.0, 0.0, 0usize);
    for trial in 0..cfg.trials as u64 {
        let draws = fading.then(|| draw_fading(total, &mut stream_rng(cfg.seed, Stream::Fading, trial, path)));
        let seed = stream_seed(cfg.seed, Stream::Noise, trial, path);
        let (out, a) = match aggregate(&uploads, &prev, cfg.p_t, total, &noisy, draws.as_deref(), seed) {
            Ok(v) => v,
            Err(ChannelError::NoParticipants) => {
                participants.push(0);
                continue;
            }
            Err(e) => return Err(e),
        };
        let (_, b) = aggregate(&uploads, &prev, cfg.p_t, total, &clean, draws.as_deref(), seed)?;
        let k = out.participants.len();
        participants.push(k);
        let law = decoded_noise_variance(cfg.sigma2, k, cfg.p_t, if fading { cfg.r_hat } else { 1.0 });
        for (x, y) in a.iter().zip(b.iter()) {
            let e = x - y;
            sum_sq += e * e;
            if law > 0.0 {
                sum_norm += e * e / law;
            }
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    Ok((sum_sq / n, sum_norm / n))
}

/// Runs the three decode paths, the power-constraint check and the
/// participation check.
pub fn verify_channel(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.trials < MIN_TRIALS {
        return Err(ConfigError::InvalidValue {
            key: "trials".into(),
            message: format!("need at least {MIN_TRIALS}, got {}", cfg.trials),
        }
        .into());
    }
    if cfg.k_hat == 0 || cfg.k_hat > cfg.partial_clients || cfg.clients == 0 || cfg.fading_clients == 0 || cfg.dim == 0 {
        return Err(ConfigError::Invalid("client counts and dimension must be positive with K_hat <= K".into()).into());
    }
    let noiseless = cfg.sigma2 == 0.0;
    let mut sink = Vec::new();

    let (full, _) = noise_path(cfg, 0, cfg.clients, cfg.clients, false, &mut sink)?;
    let full_law = decoded_noise_variance(cfg.sigma2, cfg.clients, cfg.p_t, 1.0);
    let (partial, _) = noise_path(cfg, 1, cfg.partial_clients, cfg.k_hat, false, &mut sink)?;
    let partial_law = decoded_noise_variance(cfg.sigma2, cfg.k_hat, cfg.p_t, 1.0);
    let mut counts = Vec::with_capacity(cfg.trials);
    let (fading_raw, fading_norm) = noise_path(cfg, 2, cfg.fading_clients, cfg.fading_clients, true, &mut counts)?;
    let (fading_measured, fading_theory) = if noiseless { (fading_raw, 0.0) } else { (fading_norm, 1.0) };

    let paths = vec![
        PathReport {
            name: "full".into(),
            theoretical: full_law,
            measured: full,
            deviation: deviation(full, full_law),
        },
        PathReport {
            name: "partial".into(),
            theoretical: partial_law,
            measured: partial,
            deviation: deviation(partial, partial_law),
        },
        PathReport {
            name: "fading".into(),
            theoretical: fading_theory,
            measured: fading_measured,
            deviation: deviation(fading_measured, fading_theory),
        },
    ];

    let models = client_models(cfg.clients, cfg.dim, cfg.seed);
    let prev = vec![0.0; cfg.dim];
    let norms: Vec<f64> = models.iter().map(|m| crate::params::norm_sq(m)).collect();
    let q = vec![1.0 / cfg.clients as f64; cfg.clients];
    let p = compute_precoding_factor(&norms, &q, cfg.power)?;
    let mut energy = 0.0;
    for (m, w) in models.iter().zip(&q) {
        energy += w * crate::params::norm_sq(&encode(m, &prev, p)?);
    }
    let power_residual = (energy - cfg.power).abs() / cfg.power;

    let expected = cfg.fading_clients as f64 * participation_probability(cfg.r_hat);
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    let participation_deviation = deviation(mean, expected);

    let passed = paths.iter().all(|p| p.deviation <= VARIANCE_TOLERANCE)
        && power_residual <= 1e-9
        && participation_deviation <= PARTICIPATION_TOLERANCE;
    Ok(VerifyReport {
        trials: cfg.trials,
        paths,
        power_residual,
        expected_participants: expected,
        mean_participants: mean,
        participation_deviation,
        passed,
    })
}

/// `verify-channel` with `trials` Monte-Carlo rounds per path.
pub fn cli_verify_channel(trials: usize, config: &VerifyConfig) -> Result<VerifyReport> {
    verify_channel(&VerifyConfig {
        trials,
        ..config.clone()
    })
}
