use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::datagen::Dataset;
use crate::params::ParamVector;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
    },
}

/// Architecture of a classifier over `n_features` inputs and `n_classes`
/// outputs. Parameters are laid out layer by layer, each layer as its
/// row-major weight matrix (`out x in`) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_features: usize,
    pub n_classes: usize,
}

impl ModelSpec {
    pub fn logistic(n_features: usize, n_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Logistic,
            n_features,
            n_classes,
        }
    }

    pub fn mlp(n_features: usize, hidden: Vec<usize>, activation: Activation, n_classes: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp { hidden, activation },
            n_features,
            n_classes,
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.kind, ModelKind::Logistic)
    }

    fn hidden(&self) -> &[usize] {
        match &self.kind {
            ModelKind::Logistic => &[],
            ModelKind::Mlp { hidden, .. } => hidden,
        }
    }

    fn activation(&self) -> Activation {
        match &self.kind {
            ModelKind::Logistic => Activation::Tanh,
            ModelKind::Mlp { activation, .. } => *activation,
        }
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden().len() + 2);
        w.push(self.n_features);
        w.extend_from_slice(self.hidden());
        w.push(self.n_classes);
        w
    }

    /// Total parameter count `d`.
    pub fn dim(&self) -> usize {
        self.widths().windows(2).map(|p| p[1] * (p[0] + 1)).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(ModelError::InvalidArgument(
                "models need at least one feature and two classes".into(),
            ));
        }
        if self.hidden().contains(&0) {
            return Err(ModelError::InvalidArgument("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    /// Initial parameters: zeros for logistic models, `N(0, 1/fan_in)`
    /// weights and zero biases for MLPs.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut theta = ParamVector::zeros(self.dim());
        if self.hidden().is_empty() {
            return theta;
        }
        let mut rng = rng_from_seed(seed);
        let mut offset = 0;
        for pair in self.widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            for w in &mut theta[offset..offset + fan_in * fan_out] {
                let z: f64 = rng.sample(StandardNormal);
                *w = scale * z;
            }
            offset += fan_out * (fan_in + 1);
        }
        theta
    }

    pub(crate) fn check_inputs(&self, theta: &[f64], ds: &Dataset) -> Result<(), ModelError> {
        if theta.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        if ds.n_features() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                got: ds.n_features(),
            });
        }
        if ds.n_classes() > self.n_classes {
            return Err(ModelError::InvalidArgument(format!(
                "dataset has {} classes, model outputs {}",
                ds.n_classes(),
                self.n_classes
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over the rows in `rows` (all rows when `None`),
    /// accumulating the mean gradient into `grad` when given. `grad` is
    /// overwritten. Inputs are assumed validated.
    pub(crate) fn loss_grad_unchecked(
        &self,
        theta: &[f64],
        ds: &Dataset,
        rows: Option<&[usize]>,
        mut grad: Option<&mut [f64]>,
    ) -> f64 {
        let widths = self.widths();
        let act = self.activation();
        let n_layers = widths.len() - 1;
        let mut work = Workspace::new(&widths);
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }

        let count = rows.map_or(ds.len(), |r| r.len());
        let mut total = 0.0;
        for s in 0..count {
            let i = rows.map_or(s, |r| r[s]);
            let x = ds.row(i);
            let y = ds.label(i);
            self.forward(theta, x, &widths, act, &mut work);

            let logits = &work.acts[n_layers];
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let lse = max + sum_exp.ln();
            total += lse - logits[y];

            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            let delta = &mut work.deltas[n_layers];
            for (c, d) in delta.iter_mut().enumerate() {
                *d = (logits[c] - lse).exp() - if c == y { 1.0 } else { 0.0 };
            }
            // Backward pass, last layer first.
            let mut offset = self.dim();
            for l in (1..=n_layers).rev() {
                let (fan_in, fan_out) = (widths[l - 1], widths[l]);
                offset -= fan_out * (fan_in + 1);
                let w_len = fan_out * fan_in;
                let input: &[f64] = if l == 1 { x } else { &work.acts[l - 1] };
                {
                    let delta = &work.deltas[l];
                    let (gw, gb) = g[offset..offset + w_len + fan_out].split_at_mut(w_len);
                    for o in 0..fan_out {
                        let d = delta[o];
                        gb[o] += d;
                        let row = &mut gw[o * fan_in..(o + 1) * fan_in];
                        for (gi, xi) in row.iter_mut().zip(input) {
                            *gi += d * xi;
                        }
                    }
                }
                if l > 1 {
                    let (lower, upper) = work.deltas.split_at_mut(l);
                    let prev = &mut lower[l - 1];
                    let delta = &upper[0];
                    let w = &theta[offset..offset + w_len];
                    for (j, p) in prev.iter_mut().enumerate() {
                        let back: f64 = (0..fan_out).map(|o| w[o * fan_in + j] * delta[o]).sum();
                        *p = back * act.derivative(work.pre[l - 1][j], work.acts[l - 1][j]);
                    }
                }
            }
        }
        let inv = 1.0 / count as f64;
        if let Some(g) = grad {
            g.iter_mut().for_each(|x| *x *= inv);
        }
        total * inv
    }

    fn forward(&self, theta: &[f64], x: &[f64], widths: &[usize], act: Activation, work: &mut Workspace) {
        let n_layers = widths.len() - 1;
        let mut offset = 0;
        for l in 1..=n_layers {
            let (fan_in, fan_out) = (widths[l - 1], widths[l]);
            let w = &theta[offset..offset + fan_out * fan_in];
            let b = &theta[offset + fan_out * fan_in..offset + fan_out * (fan_in + 1)];
            offset += fan_out * (fan_in + 1);
            let (lower, upper) = work.acts.split_at_mut(l);
            let input: &[f64] = if l == 1 { x } else { &lower[l - 1] };
            let out = &mut upper[0];
            for o in 0..fan_out {
                let z = b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                work.pre[l][o] = z;
                out[o] = if l == n_layers { z } else { act.apply(z) };
            }
        }
    }

    /// Output scores for one input row.
    pub fn logits(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let widths = self.widths();
        let mut work = Workspace::new(&widths);
        self.forward(theta, x, &widths, self.activation(), &mut work);
        work.acts.pop().expect("output layer")
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> usize {
        let logits = self.logits(theta, x);
        let mut best = 0;
        for (c, &z) in logits.iter().enumerate() {
            if z > logits[best] {
                best = c;
            }
        }
        best
    }
}

struct Workspace {
    pre: Vec<Vec<f64>>,
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(widths: &[usize]) -> Self {
        let bufs = || widths.iter().map(|&w| vec![0.0; w]).collect::<Vec<_>>();
        Workspace {
            pre: bufs(),
            acts: bufs(),
            deltas: bufs(),
        }
    }
}

/// Upper bound on the smoothness constant of the logistic loss over `ds`:
/// half the largest eigenvalue of the second moment of `[x, 1]`, found by
/// power iteration.
pub fn logistic_smoothness(ds: &Dataset) -> f64 {
    let m = ds.n_features() + 1;
    let mut cov = vec![0.0; m * m];
    for i in 0..ds.len() {
        let x = ds.row(i);
        for a in 0..m {
            let xa = if a < m - 1 { x[a] } else { 1.0 };
            for b in 0..m {
                let xb = if b < m - 1 { x[b] } else { 1.0 };
                cov[a * m + b] += xa * xb;
            }
        }
    }
    let n = ds.len() as f64;
    cov.iter_mut().for_each(|c| *c /= n);
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let mut eig = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..m)
            .map(|a| (0..m).map(|b| cov[a * m + b] * v[b]).sum())
            .collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let converged = (norm - eig).abs() <= 1e-12 * norm;
        eig = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if converged {
            break;
        }
    }
    0.5 * eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(ModelSpec::logistic(5, 3).dim(), 18);
        assert_eq!(ModelSpec::mlp(4, vec![8, 6], Activation::Tanh, 3).dim(), 8 * 5 + 6 * 9 + 3 * 7);
    }

    #[test]
    fn predict_breaks_ties_low() {
        let spec = ModelSpec::logistic(2, 4);
        let theta = vec![0.0; spec.dim()];
        assert_eq!(spec.predict(&theta, &[1.0, -3.0]), 0);
    }

    #[test]
    fn logistic_init_is_zero_and_mlp_init_is_seeded() {
        assert!(ModelSpec::logistic(3, 2).init_params(1).iter().all(|&v| v == 0.0));
        let spec = ModelSpec::mlp(3, vec![4], Activation::Relu, 2);
        assert_eq!(spec.init_params(5), spec.init_params(5));
        assert_ne!(spec.init_params(5), spec.init_params(6));
    }

    #[test]
    fn validate_rejects_degenerate_architectures() {
        assert!(ModelSpec::logistic(0, 2).validate().is_err());
        assert!(ModelSpec::logistic(2, 1).validate().is_err());
        assert!(ModelSpec::mlp(2, vec![0], Activation::Tanh, 2).validate().is_err());
    }

    #[test]
    fn smoothness_of_unit_rows() {
        // Rows [1, 0] and [0, 1] with bias: second moment [[.5,0,.5],[0,.5,.5],[.5,.5,1]].
        let ds = Dataset::new(vec![1.0, 0.0, 0.0, 1.0], vec![0, 1], 2, 2).unwrap();
        let l = logistic_smoothness(&ds);
        // Its largest eigenvalue is 1.5, eigenvector (1, 1, 2).
        let expected = 0.75;
        assert!((l - expected).abs() < 1e-9, "{l} vs {expected}");
    }
}
