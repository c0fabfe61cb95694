use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::ProtocolError;
use crate::channel::{ChannelConfig, PrecodingMode};
use crate::datagen::ShortfallPolicy;
use crate::model::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ProtocolVariant {
    #[default]
    #[serde(rename = "NoROTA")]
    NoRota,
    #[serde(rename = "COTAF")]
    Cotaf,
    FedProx,
    NoisyProx,
    NoisyFedAvg,
    RobustComm,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 6] = [
        ProtocolVariant::NoRota,
        ProtocolVariant::Cotaf,
        ProtocolVariant::FedProx,
        ProtocolVariant::NoisyProx,
        ProtocolVariant::NoisyFedAvg,
        ProtocolVariant::RobustComm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolVariant::NoRota => "NoROTA",
            ProtocolVariant::Cotaf => "COTAF",
            ProtocolVariant::FedProx => "FedProx",
            ProtocolVariant::NoisyProx => "NoisyProx",
            ProtocolVariant::NoisyFedAvg => "NoisyFedAvg",
            ProtocolVariant::RobustComm => "RobustComm",
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = ProtocolVariant::ALL.iter().map(|v| v.name()).collect();
                format!("unknown variant `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StragglerPolicy {
    /// Stragglers transmit whatever their `E_k < E` epochs produced.
    #[default]
    IncludePartial,
    /// Stragglers are left out of aggregation.
    Drop,
}

impl FromStr for StragglerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "include-partial" | "include" => Ok(StragglerPolicy::IncludePartial),
            "drop" => Ok(StragglerPolicy::Drop),
            _ => Err(format!("unknown straggler policy `{s}` (expected include-partial or drop)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StragglerModel {
    /// Share of clients straggling in each round.
    pub fraction: f64,
    pub policy: StragglerPolicy,
    /// Draw the straggler set once and keep it for the whole run.
    #[serde(default)]
    pub fixed: bool,
}

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic {
        samples: usize,
        features: usize,
        classes: usize,
        separation: f64,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        feature_columns: Vec<String>,
        #[serde(default)]
        normalize: bool,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            samples: 6000,
            features: 20,
            classes: 10,
            separation: 3.0,
        }
    }
}

/// Which clients may transmit in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParticipationMode {
    Full,
    /// Uniform `K̂`-subset without replacement.
    Random { k_hat: usize },
    /// Clients with fading magnitude above `r̂`.
    Fading,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: ProtocolVariant,
    pub seed: u64,
    /// `T`.
    pub rounds: usize,
    /// `K`.
    pub clients: usize,
    /// `K̂`; `None` for full participation.
    pub clients_per_round: Option<usize>,
    /// `E`.
    pub epochs: usize,
    pub lambda: f64,
    pub eta: f64,
    pub batch: usize,
    pub pi: f64,
    pub test_fraction: f64,
    /// Test accuracy is evaluated every `eval_every` rounds and at round `T`.
    pub eval_every: usize,
    pub track_gamma: bool,
    pub track_zeta: bool,
    pub zeta_budget: usize,
    pub model: ModelKind,
    pub data: DataSource,
    #[serde(default)]
    pub shortfall: ShortfallPolicy,
    pub channel: ChannelConfig,
    /// When set, `channel.sigma2` is derived from this SNR once the model
    /// dimension is known.
    pub snr_db: Option<f64>,
    pub straggler: StragglerModel,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: ProtocolVariant::NoRota,
            seed: 0,
            rounds: 100,
            clients: 30,
            clients_per_round: None,
            epochs: 3,
            lambda: 0.4,
            eta: 0.05,
            batch: 64,
            pi: 0.5,
            test_fraction: 0.2,
            eval_every: 1,
            track_gamma: true,
            track_zeta: false,
            zeta_budget: 2000,
            model: ModelKind::Logistic,
            data: DataSource::default(),
            shortfall: ShortfallPolicy::default(),
            channel: ChannelConfig::default(),
            snr_db: Some(0.0),
            straggler: StragglerModel::default(),
        }
    }
}

impl RunConfig {
    pub fn participation_mode(&self) -> ParticipationMode {
        if self.channel.fading {
            ParticipationMode::Fading
        } else {
            match self.clients_per_round {
                Some(k_hat) if k_hat < self.clients => ParticipationMode::Random { k_hat },
                _ => ParticipationMode::Full,
            }
        }
    }

    /// Checks every field invariant and names the offending field.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        fn err(field: &str, message: impl Into<String>) -> ProtocolError {
            ProtocolError::config(field, message)
        }
        if self.clients == 0 {
            return Err(err("clients", "K must be at least 1"));
        }
        if self.rounds > 0 && self.epochs == 0 {
            return Err(err("epochs", "E must be at least 1"));
        }
        if let Some(k_hat) = self.clients_per_round {
            if k_hat == 0 || k_hat > self.clients {
                return Err(err(
                    "clients_per_round",
                    format!("K_hat = {k_hat} must lie in [1, K = {}]", self.clients),
                ));
            }
            if self.channel.fading && k_hat < self.clients {
                return Err(err(
                    "clients_per_round",
                    "random-subset participation cannot be combined with fading",
                ));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(err("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(err("eta", format!("must be > 0, got {}", self.eta)));
        }
        if self.batch == 0 {
            return Err(err("batch", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(err("pi", format!("must lie in [0, 1], got {}", self.pi)));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(err("test_fraction", format!("must lie in (0, 1), got {}", self.test_fraction)));
        }
        if self.eval_every == 0 {
            return Err(err("eval_every", "must be at least 1"));
        }
        if self.track_zeta && self.zeta_budget == 0 {
            return Err(err("zeta_budget", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.straggler.fraction) {
            return Err(err(
                "straggler.fraction",
                format!("must lie in [0, 1], got {}", self.straggler.fraction),
            ));
        }
        if let Some(db) = self.snr_db {
            if !db.is_finite() {
                return Err(err("channel.snr_db", "must be finite"));
            }
        }
        self.channel.validate().map_err(|e| {
            let field = match &e {
                crate::channel::ChannelError::InvalidArgument(m) if m.contains("power") => "channel.P",
                crate::channel::ChannelError::InvalidArgument(m) if m.contains("r_hat") => "channel.r_hat",
                _ => "channel.sigma2",
            };
            err(field, e.to_string())
        })?;
        match &self.data {
            DataSource::Synthetic {
                samples,
                features,
                classes,
                separation,
            } => {
                if *features == 0 {
                    return Err(err("data.features", "must be at least 1"));
                }
                if *classes < 2 {
                    return Err(err("data.classes", "must be at least 2"));
                }
                if *samples < *classes {
                    return Err(err("data.samples", "must be at least the class count"));
                }
                if !(*separation >= 0.0 && separation.is_finite()) {
                    return Err(err("data.separation", "must be >= 0"));
                }
            }
            DataSource::Csv { label_column, .. } => {
                if label_column.is_empty() {
                    return Err(err("data.label_column", "must be set for CSV data"));
                }
            }
        }
        if let crate::model::ModelKind::Mlp { hidden, .. } = &self.model {
            if hidden.is_empty() || hidden.contains(&0) {
                return Err(err("model.hidden", "layer widths must be positive and non-empty"));
            }
        }
        Ok(())
    }
}

/// Effective configuration of `variant` on top of `base`.
///
/// `base.variant` must be NoROTA or `variant` itself; any other value is a
/// contradictory override.
pub fn variant_config(variant: ProtocolVariant, base: &RunConfig) -> Result<RunConfig, ProtocolError> {
    if base.variant != ProtocolVariant::NoRota && base.variant != variant {
        return Err(ProtocolError::config(
            "variant",
            format!("base config is already {}, cannot apply {variant}", base.variant),
        ));
    }
    let mut cfg = base.clone();
    cfg.variant = variant;
    match variant {
        ProtocolVariant::NoRota => {}
        ProtocolVariant::FedProx => {
            cfg.channel.sigma2 = 0.0;
            cfg.snr_db = None;
            cfg.channel.precoding = PrecodingMode::Unit;
        }
        ProtocolVariant::Cotaf => {
            cfg.lambda = 0.0;
            cfg.straggler.policy = StragglerPolicy::Drop;
        }
        ProtocolVariant::NoisyProx => {
            cfg.channel.precoding = PrecodingMode::Unit;
        }
        ProtocolVariant::NoisyFedAvg => {
            cfg.lambda = 0.0;
            cfg.channel.precoding = PrecodingMode::Unit;
            cfg.straggler.policy = StragglerPolicy::Drop;
        }
        ProtocolVariant::RobustComm => {
            if cfg.snr_db.is_some() {
                return Err(ProtocolError::config(
                    "channel.snr_db",
                    "RobustComm needs a resolved noise variance; resolve the SNR first",
                ));
            }
            cfg.lambda = cfg.channel.sigma2;
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            snr_db: None,
            channel: ChannelConfig {
                sigma2: 0.01,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn fedprox_is_noiseless_unit() {
        let c = variant_config(ProtocolVariant::FedProx, &base()).unwrap();
        assert_eq!(c.channel.sigma2, 0.0);
        assert_eq!(c.channel.precoding, PrecodingMode::Unit);
    }

    #[test]
    fn cotaf_drops_and_removes_prox() {
        let c = variant_config(ProtocolVariant::Cotaf, &base()).unwrap();
        assert_eq!(c.lambda, 0.0);
        assert_eq!(c.straggler.policy, StragglerPolicy::Drop);
    }

    #[test]
    fn robustcomm_sets_lambda_to_noise() {
        let mut b = base();
        b.channel.sigma2 = 0.001;
        assert_eq!(variant_config(ProtocolVariant::RobustComm, &b).unwrap().lambda, 0.001);
    }

    #[test]
    fn contradictory_variant_rejected() {
        let b = variant_config(ProtocolVariant::Cotaf, &base()).unwrap();
        assert!(variant_config(ProtocolVariant::FedProx, &b).is_err());
        assert!(variant_config(ProtocolVariant::Cotaf, &b).is_ok());
    }

    #[test]
    fn k_hat_above_k_names_field() {
        let mut c = base();
        c.clients_per_round = Some(31);
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("clients_per_round"), "{e}");
    }

    #[test]
    fn variant_names_parse() {
        for v in ProtocolVariant::ALL {
            assert_eq!(v.name().parse::<ProtocolVariant>().unwrap(), v);
        }
    }
}
