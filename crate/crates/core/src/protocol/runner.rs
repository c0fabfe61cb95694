use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::{assign_stragglers, select_participants, variant_config, DataSource, ProtocolError, RoundRecord, RunConfig};
use crate::channel::{aggregate, compute_precoding_factor, draw_fading, sigma2_from_snr_db, ChannelError, ClientUpload, PrecodingMode};
use crate::datagen::{
    gen_synthetic_classification, load_csv_dataset, partition_heterogeneous, split_train_test, ClientShard, CsvOptions,
    Dataset, PartitionSpec, Substitution,
};
use crate::diagnostics::{evaluate_accuracy, global_stats, GlobalStats};
use crate::model::{local_solve_sgd, measure_gamma, measure_zeta, ModelError, ModelSpec, ProxConfig};
use crate::params::{dist_sq, ParamVector};
use crate::rng::{stream_rng, stream_seed, Stream};

/// A resolved experiment: effective configuration, model and data.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Configuration after SNR resolution and variant overrides.
    pub config: RunConfig,
    pub spec: ModelSpec,
    pub shards: Vec<ClientShard>,
    pub test: Dataset,
    pub substitutions: Vec<Substitution>,
}

impl Experiment {
    /// Builds an experiment from already prepared shards. `config` is used
    /// as given, after validation.
    pub fn from_parts(config: RunConfig, spec: ModelSpec, shards: Vec<ClientShard>, test: Dataset) -> Result<Self, ProtocolError> {
        config.validate()?;
        spec.validate()?;
        if shards.len() != config.clients {
            return Err(ProtocolError::config(
                "clients",
                format!("{} shards given for K = {}", shards.len(), config.clients),
            ));
        }
        Ok(Experiment {
            config,
            spec,
            shards,
            test,
            substitutions: Vec::new(),
        })
    }
}

/// Loads data, partitions it, resolves the noise level and applies the
/// variant's overrides.
pub fn prepare(cfg: &RunConfig) -> Result<Experiment, ProtocolError> {
    cfg.validate()?;
    let seed = cfg.seed;
    let data = match &cfg.data {
        DataSource::Synthetic {
            samples,
            features,
            classes,
            separation,
        } => gen_synthetic_classification(
            *samples,
            *features,
            *classes,
            *separation,
            stream_seed(seed, Stream::Data, 0, 0),
        )?,
        DataSource::Csv {
            path,
            label_column,
            feature_columns,
            normalize,
        } => load_csv_dataset(
            path,
            &CsvOptions {
                label_column: label_column.clone(),
                feature_columns: feature_columns.clone(),
                normalize: *normalize,
            },
        )?,
    };
    let (train, test) = split_train_test(&data, cfg.test_fraction, stream_seed(seed, Stream::Split, 0, 0))?;
    let mut pspec = PartitionSpec::new(cfg.clients, cfg.pi, stream_seed(seed, Stream::Partition, 0, 0));
    pspec.shortfall = cfg.shortfall;
    let partition = partition_heterogeneous(&train, &pspec)?;
    let spec = ModelSpec {
        kind: cfg.model.clone(),
        n_features: train.n_features(),
        n_classes: train.n_classes(),
    };
    spec.validate()?;

    let mut resolved = cfg.clone();
    if let Some(db) = resolved.snr_db.take() {
        resolved.channel.sigma2 = sigma2_from_snr_db(resolved.channel.power, spec.dim(), db);
    }
    let config = variant_config(cfg.variant, &resolved)?;
    config.validate()?;
    Ok(Experiment {
        config,
        spec,
        shards: partition.shards,
        test,
        substitutions: partition.substitutions,
    })
}

/// Mutable state carried between rounds.
#[derive(Debug, Clone)]
pub struct TrainingState {
    pub theta: ParamVector,
    /// Last precoding factor actually used.
    pub last_p: Option<f64>,
    /// Weighted mean `‖Δ_k‖²` feeding the delayed precoding mode.
    pub delayed_norm_sq: Option<f64>,
}

impl TrainingState {
    pub fn new(exp: &Experiment) -> Result<Self, ProtocolError> {
        let theta = exp.spec.init_params(stream_seed(exp.config.seed, Stream::Init, 0, 0));
        let mut state = TrainingState {
            theta,
            last_p: None,
            delayed_norm_sq: None,
        };
        if exp.config.channel.precoding == PrecodingMode::Delayed {
            // Round one uses the size of a single gradient step from θ̃⁰.
            let eta = exp.config.eta;
            let norms: Vec<f64> = exp
                .shards
                .par_iter()
                .map(|s| crate::model::local_grad(&state.theta, &s.dataset, &exp.spec).map(|g| eta * eta * g.norm_sq()))
                .collect::<Result<_, _>>()?;
            let mean: f64 = norms.iter().zip(&exp.shards).map(|(n, s)| n * s.weight).sum();
            state.delayed_norm_sq = (mean > 0.0).then_some(mean);
        }
        Ok(state)
    }
}

fn diverged(round: usize, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::Diverged {
        round,
        reason: reason.into(),
    }
}

fn stats_checked(exp: &Experiment, theta: &[f64], t: usize) -> Result<GlobalStats, ProtocolError> {
    let s = global_stats(theta, &exp.shards, &exp.spec)?;
    if !(s.loss.is_finite() && s.grad_norm_sq.is_finite() && s.local_grad_sq_mean.is_finite()) {
        return Err(diverged(t, "non-finite global metrics"));
    }
    Ok(s)
}

fn accuracy_due(exp: &Experiment, t: usize) -> bool {
    t.is_multiple_of(exp.config.eval_every) || t == exp.config.rounds
}

fn metrics_record(exp: &Experiment, theta: &[f64], t: usize) -> Result<RoundRecord, ProtocolError> {
    let s = stats_checked(exp, theta, t)?;
    let test_accuracy = if accuracy_due(exp, t) {
        Some(evaluate_accuracy(theta, &exp.test, &exp.spec)?)
    } else {
        None
    };
    Ok(RoundRecord {
        t,
        global_loss: s.loss,
        grad_norm_sq: s.grad_norm_sq,
        local_grad_sq_mean: s.local_grad_sq_mean,
        max_local_grad_sq: s.max_local_grad_sq,
        test_accuracy,
        p_t: None,
        participants: Vec::new(),
        epochs: Vec::new(),
        gamma_hat: Vec::new(),
        zeta_hat: Vec::new(),
        transmit_power: None,
        noise_seed: None,
        skipped: false,
        wall_ms: 0.0,
    })
}

struct LocalResult {
    theta: ParamVector,
    gamma: Option<f64>,
    zeta: Option<f64>,
}

/// Runs round `t ≥ 1`, updating `state.theta` in place.
pub fn run_round(exp: &Experiment, state: &mut TrainingState, t: usize) -> Result<RoundRecord, ProtocolError> {
    let start = Instant::now();
    let cfg = &exp.config;
    let k = cfg.clients;
    let seed = cfg.seed;
    let round = t as u64;

    let set_round = if cfg.straggler.fixed { 0 } else { round };
    let e_k = assign_stragglers(
        k,
        &cfg.straggler,
        cfg.epochs,
        &mut stream_rng(seed, Stream::Stragglers, set_round, 0),
        &mut stream_rng(seed, Stream::Stragglers, round, 1),
    );
    let draws = cfg
        .channel
        .fading
        .then(|| draw_fading(k, &mut stream_rng(seed, Stream::Fading, round, 0)));
    let participants = select_participants(
        cfg.participation_mode(),
        k,
        draws.as_deref(),
        cfg.channel.r_hat,
        cfg.straggler.policy,
        &e_k,
        cfg.epochs,
        &mut stream_rng(seed, Stream::Selection, round, 0),
    );

    if participants.is_empty() {
        log::debug!("round {t}: no participants, model unchanged");
        let mut rec = metrics_record(exp, &state.theta, t)?;
        rec.epochs = e_k;
        rec.gamma_hat = vec![None; k];
        rec.zeta_hat = vec![None; k];
        rec.skipped = true;
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok(rec);
    }

    let prox = ProxConfig {
        lambda: cfg.lambda,
        eta: cfg.eta,
        epochs: cfg.epochs,
        batch: cfg.batch,
    };
    let theta_prev = &state.theta;
    let local: Vec<LocalResult> = participants
        .par_iter()
        .map(|&c| {
            let shard = &exp.shards[c];
            let theta = local_solve_sgd(
                &shard.dataset,
                theta_prev,
                &prox,
                e_k[c],
                stream_seed(seed, Stream::Solve, round, c as u64),
                &exp.spec,
            )
            .map_err(|e| match e {
                ModelError::Diverged { epoch } => diverged(t, format!("client {c} local solve, epoch {epoch}")),
                other => other.into(),
            })?;
            let gamma = if cfg.track_gamma {
                measure_gamma(&theta, theta_prev, cfg.lambda, &shard.dataset, &exp.spec)?.gamma_hat
            } else {
                None
            };
            let zeta = if cfg.track_zeta {
                Some(measure_zeta(&theta, theta_prev, cfg.lambda, &shard.dataset, &exp.spec, cfg.zeta_budget)?)
            } else {
                None
            };
            Ok(LocalResult { theta, gamma, zeta })
        })
        .collect::<Result<_, ProtocolError>>()?;

    let q_sum: f64 = participants.iter().map(|&c| exp.shards[c].weight).sum();
    let q: Vec<f64> = participants.iter().map(|&c| exp.shards[c].weight / q_sum).collect();
    let norms: Vec<f64> = local.iter().map(|l| dist_sq(&l.theta, theta_prev)).collect();
    let fallback = state.last_p.unwrap_or(cfg.channel.power);
    let p_t = match cfg.channel.precoding {
        PrecodingMode::Unit => 1.0,
        PrecodingMode::Oracle => match compute_precoding_factor(&norms, &q, cfg.channel.power) {
            Ok(p) => p,
            Err(ChannelError::DegenerateUpdate) => fallback,
            Err(e) => return Err(e.into()),
        },
        PrecodingMode::Delayed => match state.delayed_norm_sq {
            Some(m) if m > 0.0 => cfg.channel.power / m,
            _ => fallback,
        },
    };
    if !(p_t.is_finite() && p_t > 0.0) {
        return Err(diverged(t, format!("precoding factor {p_t}")));
    }

    let uploads: Vec<ClientUpload> = participants
        .iter()
        .zip(&local)
        .map(|(&c, l)| ClientUpload {
            client_id: c,
            theta: l.theta.as_slice(),
        })
        .collect();
    let noise_seed = stream_seed(seed, Stream::Noise, round, 0);
    let (out, theta_new) = aggregate(&uploads, theta_prev, p_t, k, &cfg.channel, draws.as_deref(), noise_seed)?;
    if !theta_new.is_finite() {
        return Err(diverged(t, "non-finite global model"));
    }
    let transmit_power = out
        .participants
        .iter()
        .zip(&out.transmit_energy)
        .map(|(c, e)| exp.shards[*c].weight / q_sum * e)
        .sum();

    if cfg.channel.precoding == PrecodingMode::Delayed {
        let mean: f64 = norms.iter().zip(&q).map(|(n, w)| n * w).sum();
        if mean > 0.0 {
            state.delayed_norm_sq = Some(mean);
        }
    }
    state.last_p = Some(p_t);
    state.theta = theta_new;

    let mut gamma_hat = vec![None; k];
    let mut zeta_hat = vec![None; k];
    for (&c, l) in participants.iter().zip(&local) {
        gamma_hat[c] = l.gamma;
        zeta_hat[c] = l.zeta;
    }
    let mut rec = metrics_record(exp, &state.theta, t)?;
    rec.p_t = Some(p_t);
    rec.participants = out.participants;
    rec.epochs = e_k;
    rec.gamma_hat = gamma_hat;
    rec.zeta_hat = zeta_hat;
    rec.transmit_power = Some(transmit_power);
    rec.noise_seed = Some(noise_seed);
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep `θ̃ᵗ` of every round in [`RunResult::trajectory`].
    pub keep_trajectory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub spec: ModelSpec,
    /// Round 0 (initial model) followed by one record per completed round.
    pub records: Vec<RoundRecord>,
    pub final_theta: ParamVector,
    /// Round at which training diverged, if it did.
    pub diverged_at: Option<usize>,
    pub divergence_reason: Option<String>,
    /// `θ̃⁰, θ̃¹, …` when requested.
    pub trajectory: Vec<ParamVector>,
    pub substitutions: Vec<Substitution>,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Accuracy of the last evaluated round.
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.test_accuracy)
    }
}

pub fn run_training(cfg: &RunConfig) -> Result<RunResult, ProtocolError> {
    run_training_with(cfg, &RunOptions::default())
}

pub fn run_training_with(cfg: &RunConfig, opts: &RunOptions) -> Result<RunResult, ProtocolError> {
    let exp = prepare(cfg)?;
    run_experiment(&exp, opts)
}

/// Runs all `T` rounds of a prepared experiment. Divergence ends the run
/// early and is reported in the result rather than as an error.
pub fn run_experiment(exp: &Experiment, opts: &RunOptions) -> Result<RunResult, ProtocolError> {
    let mut state = TrainingState::new(exp)?;
    let mut records = vec![metrics_record(exp, &state.theta, 0)?];
    let mut trajectory = Vec::new();
    if opts.keep_trajectory {
        trajectory.push(state.theta.clone());
    }
    let mut diverged_at = None;
    let mut divergence_reason = None;
    for t in 1..=exp.config.rounds {
        match run_round(exp, &mut state, t) {
            Ok(rec) => {
                log::debug!("round {t}: loss {:.6} |grad|^2 {:.3e}", rec.global_loss, rec.grad_norm_sq);
                records.push(rec);
                if opts.keep_trajectory {
                    trajectory.push(state.theta.clone());
                }
            }
            Err(ProtocolError::Diverged { round, reason }) => {
                log::warn!("diverged in round {round}: {reason}");
                diverged_at = Some(round);
                divergence_reason = Some(reason);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunResult {
        config: exp.config.clone(),
        spec: exp.spec.clone(),
        records,
        final_theta: state.theta,
        diverged_at,
        divergence_reason,
        trajectory,
        substitutions: exp.substitutions.clone(),
    })
}
