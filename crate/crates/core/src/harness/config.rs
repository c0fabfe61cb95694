//! Experiment config files.
//!
//! A config is a UTF-8 text file of `key = value` lines. Blank lines and
//! lines starting with `#` are ignored, as is anything after a `#` on a
//! value line. Keys are dotted paths; every key is optional and unknown keys
//! are rejected. Lists are comma separated.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `variant` | NoROTA, COTAF, FedProx, NoisyProx, NoisyFedAvg, RobustComm | NoROTA |
//! | `seed` | master seed | 0 |
//! | `rounds` | `T` | 100 |
//! | `clients` | `K` | 30 |
//! | `clients_per_round` | `K̂`, random-subset participation | all |
//! | `epochs` | `E` | 3 |
//! | `lambda`, `eta`, `batch` | local solver | 0.4, 0.05, 64 |
//! | `pi` | label similarity in `[0, 1]` | 0.5 |
//! | `test_fraction` | held-out share | 0.2 |
//! | `eval_every` | accuracy evaluation period | 1 |
//! | `track_gamma`, `track_zeta`, `zeta_budget` | inexactness tracking | true, false, 2000 |
//! | `model.kind` | `logistic` or `mlp` | logistic |
//! | `model.hidden`, `model.activation` | MLP widths, `tanh`/`relu` | 32, tanh |
//! | `data.source` | `synthetic` or `csv` | synthetic |
//! | `data.samples`, `data.features`, `data.classes`, `data.separation` | synthetic data | 6000, 20, 10, 3 |
//! | `data.path`, `data.label_column`, `data.feature_columns`, `data.normalize` | CSV data | |
//! | `data.shortfall` | `fill-from-largest` or `error` | fill-from-largest |
//! | `channel.P` | transmit power | 1 |
//! | `channel.snr_db` | SNR in dB, converted with the model dimension | 0 |
//! | `channel.sigma2` | noise variance (excludes `snr_db`) | |
//! | `channel.fading`, `channel.r_hat` | block fading and threshold | false, 0 |
//! | `channel.precoding` | `oracle`, `delayed`, `unit` | oracle |
//! | `channel.baseband` | `real` or `complex` | real |
//! | `straggler.fraction`, `straggler.policy`, `straggler.fixed` | stragglers | 0, include-partial, false |
//!
//! Sweep files add `sweep.axis` (`snr_db`, `pi`, `straggler_fraction`,
//! `lambda`, `r_hat`), `sweep.values`, `sweep.repeats` and `sweep.variants`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

use super::ConfigError;
use crate::channel::{BasebandMode, PrecodingMode};
use crate::datagen::ShortfallPolicy;
use crate::model::{Activation, ModelKind};
use crate::protocol::{DataSource, ProtocolVariant, RunConfig, StragglerPolicy};

/// Quantity varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    Pi,
    StragglerFraction,
    Lambda,
    RHat,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Pi => "pi",
            SweepAxis::StragglerFraction => "straggler_fraction",
            SweepAxis::Lambda => "lambda",
            SweepAxis::RHat => "r_hat",
        }
    }

    /// Sets this axis of `cfg` to `value`.
    pub fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            SweepAxis::SnrDb => cfg.snr_db = Some(value),
            SweepAxis::Pi => cfg.pi = value,
            SweepAxis::StragglerFraction => cfg.straggler.fraction = value,
            SweepAxis::Lambda => cfg.lambda = value,
            SweepAxis::RHat => cfg.channel.r_hat = value,
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SweepAxis::SnrDb,
            SweepAxis::Pi,
            SweepAxis::StragglerFraction,
            SweepAxis::Lambda,
            SweepAxis::RHat,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| format!("unknown sweep axis `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: RunConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repeats: usize,
    /// Variants run in every cell; defaults to the base variant.
    pub variants: Vec<ProtocolVariant>,
}

/// A parsed config file: the run description plus optional sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub run: RunConfig,
    pub sweep: Option<SweepSpec>,
}

struct Entry {
    line: usize,
    value: String,
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "empty key".into(),
            });
        }
        let value = value.trim().to_string();
        if map.insert(key.clone(), Entry { line, value }).is_some() {
            return Err(ConfigError::DuplicateKey { line, key });
        }
    }
    Ok(map)
}

struct Reader {
    entries: BTreeMap<String, Entry>,
}

impl Reader {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.remove(key) else {
            return Ok(None);
        };
        e.value.parse::<T>().map(Some).map_err(|err| ConfigError::InvalidValue {
            key: key.to_string(),
            message: format!("line {}: `{}`: {err}", e.line, e.value),
        })
    }

    fn set<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.remove(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|err| ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: format!("line {}: `{s}`: {err}", e.line),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

fn parse_enum<T>(key: &str, value: &str, table: &[(&str, T)]) -> Result<T, ConfigError>
where
    T: Copy,
{
    table
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| ConfigError::InvalidValue {
            key: key.to_string(),
            message: format!(
                "`{value}` is not one of {}",
                table.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            ),
        })
}

/// Parses config text on top of the defaults of [`RunConfig`].
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut r = Reader { entries: tokenize(text)? };
    let mut c = RunConfig::default();

    if let Some(v) = r.take::<String>("variant")? {
        c.variant = v.parse().map_err(|m| ConfigError::InvalidValue {
            key: "variant".into(),
            message: m,
        })?;
    }
    r.set("seed", &mut c.seed)?;
    r.set("rounds", &mut c.rounds)?;
    r.set("clients", &mut c.clients)?;
    c.clients_per_round = r.take("clients_per_round")?;
    r.set("epochs", &mut c.epochs)?;
    r.set("lambda", &mut c.lambda)?;
    r.set("eta", &mut c.eta)?;
    r.set("batch", &mut c.batch)?;
    r.set("pi", &mut c.pi)?;
    r.set("test_fraction", &mut c.test_fraction)?;
    r.set("eval_every", &mut c.eval_every)?;
    r.set("track_gamma", &mut c.track_gamma)?;
    r.set("track_zeta", &mut c.track_zeta)?;
    r.set("zeta_budget", &mut c.zeta_budget)?;

    let kind = r.take::<String>("model.kind")?.unwrap_or_else(|| "logistic".into());
    let hidden = r.take_list::<usize>("model.hidden")?;
    let activation = match r.take::<String>("model.activation")? {
        Some(a) => Some(parse_enum("model.activation", &a, &[("tanh", Activation::Tanh), ("relu", Activation::Relu)])?),
        None => None,
    };
    c.model = match kind.as_str() {
        "logistic" => {
            if hidden.is_some() || activation.is_some() {
                return Err(ConfigError::Conflict(
                    "model.hidden and model.activation only apply to model.kind = mlp".into(),
                ));
            }
            ModelKind::Logistic
        }
        "mlp" => ModelKind::Mlp {
            hidden: hidden.unwrap_or_else(|| vec![32]),
            activation: activation.unwrap_or(Activation::Tanh),
        },
        other => {
            return Err(ConfigError::InvalidValue {
                key: "model.kind".into(),
                message: format!("`{other}` is not one of logistic, mlp"),
            })
        }
    };

    let source = r.take::<String>("data.source")?.unwrap_or_else(|| "synthetic".into());
    c.data = match source.as_str() {
        "synthetic" => {
            let DataSource::Synthetic {
                mut samples,
                mut features,
                mut classes,
                mut separation,
            } = DataSource::default()
            else {
                unreachable!("default data source is synthetic")
            };
            r.set("data.samples", &mut samples)?;
            r.set("data.features", &mut features)?;
            r.set("data.classes", &mut classes)?;
            r.set("data.separation", &mut separation)?;
            DataSource::Synthetic {
                samples,
                features,
                classes,
                separation,
            }
        }
        "csv" => DataSource::Csv {
            path: r.take::<String>("data.path")?.ok_or(ConfigError::Missing("data.path".into()))?.into(),
            label_column: r
                .take::<String>("data.label_column")?
                .ok_or(ConfigError::Missing("data.label_column".into()))?,
            feature_columns: r.take_list("data.feature_columns")?.unwrap_or_default(),
            normalize: r.take("data.normalize")?.unwrap_or(false),
        },
        other => {
            return Err(ConfigError::InvalidValue {
                key: "data.source".into(),
                message: format!("`{other}` is not one of synthetic, csv"),
            })
        }
    };
    if let Some(s) = r.take::<String>("data.shortfall")? {
        c.shortfall = parse_enum(
            "data.shortfall",
            &s,
            &[("fill-from-largest", ShortfallPolicy::FillFromLargest), ("error", ShortfallPolicy::Error)],
        )?;
    }

    r.set("channel.P", &mut c.channel.power)?;
    let sigma2: Option<f64> = r.take("channel.sigma2")?;
    let snr_db: Option<f64> = r.take("channel.snr_db")?;
    match (sigma2, snr_db) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Conflict(
                "channel.sigma2 and channel.snr_db are mutually exclusive".into(),
            ))
        }
        (Some(s), None) => {
            c.channel.sigma2 = s;
            c.snr_db = None;
        }
        (None, Some(db)) => c.snr_db = Some(db),
        (None, None) => {}
    }
    r.set("channel.fading", &mut c.channel.fading)?;
    r.set("channel.r_hat", &mut c.channel.r_hat)?;
    if let Some(p) = r.take::<String>("channel.precoding")? {
        c.channel.precoding = parse_enum(
            "channel.precoding",
            &p,
            &[("oracle", PrecodingMode::Oracle), ("delayed", PrecodingMode::Delayed), ("unit", PrecodingMode::Unit)],
        )?;
    }
    if let Some(b) = r.take::<String>("channel.baseband")? {
        c.channel.baseband = parse_enum("channel.baseband", &b, &[("real", BasebandMode::Real), ("complex", BasebandMode::Complex)])?;
    }

    r.set("straggler.fraction", &mut c.straggler.fraction)?;
    if let Some(p) = r.take::<String>("straggler.policy")? {
        c.straggler.policy = p.parse::<StragglerPolicy>().map_err(|m| ConfigError::InvalidValue {
            key: "straggler.policy".into(),
            message: m,
        })?;
    }
    r.set("straggler.fixed", &mut c.straggler.fixed)?;

    let axis: Option<String> = r.take("sweep.axis")?;
    let values: Option<Vec<f64>> = r.take_list("sweep.values")?;
    let repeats: Option<usize> = r.take("sweep.repeats")?;
    let variants: Option<Vec<String>> = r.take_list("sweep.variants")?;

    if let Some((key, e)) = r.entries.into_iter().next() {
        return Err(ConfigError::UnknownKey { line: e.line, key });
    }

    let sweep = match axis {
        None => {
            if values.is_some() || repeats.is_some() || variants.is_some() {
                return Err(ConfigError::Missing("sweep.axis".into()));
            }
            None
        }
        Some(a) => {
            let axis = a.parse::<SweepAxis>().map_err(|m| ConfigError::InvalidValue {
                key: "sweep.axis".into(),
                message: m,
            })?;
            let values = values.ok_or(ConfigError::Missing("sweep.values".into()))?;
            let variants = match variants {
                Some(v) => v
                    .iter()
                    .map(|s| {
                        s.parse::<ProtocolVariant>().map_err(|m| ConfigError::InvalidValue {
                            key: "sweep.variants".into(),
                            message: m,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                None => vec![c.variant],
            };
            let spec = SweepSpec {
                base: c.clone(),
                axis,
                values,
                repeats: repeats.unwrap_or(1),
                variants,
            };
            validate_sweep(&spec)?;
            Some(spec)
        }
    };
    Ok(ConfigFile { run: c, sweep })
}

pub fn validate_sweep(spec: &SweepSpec) -> Result<(), ConfigError> {
    if spec.values.is_empty() {
        return Err(ConfigError::InvalidValue {
            key: "sweep.values".into(),
            message: "must not be empty".into(),
        });
    }
    if spec.repeats == 0 {
        return Err(ConfigError::InvalidValue {
            key: "sweep.repeats".into(),
            message: "must be at least 1".into(),
        });
    }
    if spec.variants.is_empty() {
        return Err(ConfigError::InvalidValue {
            key: "sweep.variants".into(),
            message: "must not be empty".into(),
        });
    }
    if spec.axis == SweepAxis::RHat && !spec.base.channel.fading {
        return Err(ConfigError::Conflict("an r_hat sweep needs channel.fading = true".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let f = parse_config("# nothing\n\n").unwrap();
        assert_eq!(f.run, RunConfig::default());
        assert!(f.sweep.is_none());
    }

    #[test]
    fn parses_dotted_keys() {
        let text = "variant = COTAF\nclients = 10  # K\nchannel.sigma2 = 0.01\nmodel.kind = mlp\nmodel.hidden = 8, 4\nstraggler.policy = drop\n";
        let f = parse_config(text).unwrap();
        assert_eq!(f.run.variant, ProtocolVariant::Cotaf);
        assert_eq!(f.run.clients, 10);
        assert_eq!(f.run.channel.sigma2, 0.01);
        assert_eq!(f.run.snr_db, None);
        assert_eq!(
            f.run.model,
            ModelKind::Mlp {
                hidden: vec![8, 4],
                activation: Activation::Tanh
            }
        );
        assert_eq!(f.run.straggler.policy, StragglerPolicy::Drop);
    }

    #[test]
    fn unknown_key_is_reported_with_line() {
        match parse_config("seed = 1\nchannel.nosie = 3\n") {
            Err(ConfigError::UnknownKey { line, key }) => {
                assert_eq!(line, 2);
                assert_eq!(key, "channel.nosie");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_value_names_key() {
        let e = parse_config("clients = many\n").unwrap_err().to_string();
        assert!(e.contains("clients"), "{e}");
    }

    #[test]
    fn sigma_and_snr_conflict() {
        assert!(matches!(
            parse_config("channel.sigma2 = 1\nchannel.snr_db = 0\n"),
            Err(ConfigError::Conflict(_))
        ));
    }

    #[test]
    fn sweep_section() {
        let f = parse_config("sweep.axis = snr_db\nsweep.values = -10, -5, 0, 5\nsweep.repeats = 3\n").unwrap();
        let s = f.sweep.unwrap();
        assert_eq!(s.values, vec![-10.0, -5.0, 0.0, 5.0]);
        assert_eq!(s.repeats, 3);
        assert_eq!(s.variants, vec![ProtocolVariant::NoRota]);
    }
}
