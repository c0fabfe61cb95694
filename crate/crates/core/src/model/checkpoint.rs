//! Model checkpoints: `d` little-endian `f64`s plus a JSON sidecar.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::{Activation, ModelError, ModelKind, ModelSpec};
use crate::params::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: String,
    pub m: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub hidden: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub activation: Option<Activation>,
    pub d: usize,
}

impl CheckpointMeta {
    pub fn from_spec(spec: &ModelSpec) -> Self {
        let (kind, hidden, activation) = match &spec.kind {
            ModelKind::Logistic => ("logistic", vec![], None),
            ModelKind::Mlp { hidden, activation } => ("mlp", hidden.clone(), Some(*activation)),
        };
        CheckpointMeta {
            kind: kind.into(),
            m: spec.n_features,
            c: spec.n_classes,
            hidden,
            activation,
            d: spec.dim(),
        }
    }

    pub fn to_spec(&self) -> Result<ModelSpec, ModelError> {
        let spec = match self.kind.as_str() {
            "logistic" => ModelSpec::logistic(self.m, self.c),
            "mlp" => ModelSpec::mlp(
                self.m,
                self.hidden.clone(),
                self.activation.unwrap_or(Activation::Tanh),
                self.c,
            ),
            other => return Err(ModelError::InvalidArgument(format!("unknown model kind `{other}`"))),
        };
        if spec.dim() != self.d {
            return Err(ModelError::DimensionMismatch {
                expected: spec.dim(),
                got: self.d,
            });
        }
        Ok(spec)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `theta` to `path` and the metadata to `path` with a `.json` extension.
pub fn write_checkpoint(path: impl AsRef<Path>, theta: &ParamVector, spec: &ModelSpec) -> Result<(), ModelError> {
    let path = path.as_ref();
    if theta.dim() != spec.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: spec.dim(),
            got: theta.dim(),
        });
    }
    let bytes: Vec<u8> = theta.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(io_err(path))?;
    let meta = serde_json::to_string_pretty(&CheckpointMeta::from_spec(spec))?;
    let side = sidecar(path);
    std::fs::write(&side, meta).map_err(io_err(&side))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ParamVector, ModelSpec), ModelError> {
    let path = path.as_ref();
    let side = sidecar(path);
    let meta: CheckpointMeta =
        serde_json::from_str(&std::fs::read_to_string(&side).map_err(io_err(&side))?)?;
    let spec = meta.to_spec()?;
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() != 8 * meta.d {
        return Err(ModelError::DimensionMismatch {
            expected: 8 * meta.d,
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((ParamVector::from_vec(values), spec))
}
