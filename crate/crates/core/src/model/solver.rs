use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::prox::add_prox_term;
use super::{prox_objective, ModelError, ModelSpec};
use crate::datagen::Dataset;
use crate::params::{axpy, norm_sq, ParamVector};
use crate::rng::rng_from_seed;

/// Local solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub lambda: f64,
    pub eta: f64,
    /// Maximum epochs `E`.
    pub epochs: usize,
    pub batch: usize,
}

impl ProxConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(ModelError::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(ModelError::InvalidArgument("epochs and batch must be >= 1".into()));
        }
        Ok(())
    }
}

/// Runs `epochs` epochs of mini-batch SGD on `h(·; θ_init)` starting at
/// `θ_init`. Each epoch visits the rows in a fresh seeded permutation; the
/// last batch of an epoch may be short. A batch larger than the dataset is
/// clamped to the dataset size.
pub fn local_solve_sgd(
    ds: &Dataset,
    theta_init: &ParamVector,
    cfg: &ProxConfig,
    epochs: usize,
    seed: u64,
    spec: &ModelSpec,
) -> Result<ParamVector, ModelError> {
    cfg.validate()?;
    if epochs == 0 || epochs > cfg.epochs {
        return Err(ModelError::InvalidArgument(format!(
            "epoch budget {epochs} outside [1, {}]",
            cfg.epochs
        )));
    }
    spec.check_inputs(theta_init, ds)?;

    let mut rng = rng_from_seed(seed);
    let batch = cfg.batch.min(ds.len());
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut theta = theta_init.clone();
    let mut grad = vec![0.0; theta.dim()];
    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        for rows in order.chunks(batch) {
            spec.loss_grad_unchecked(&theta, ds, Some(rows), Some(&mut grad));
            add_prox_term(&mut grad, &theta, theta_init, cfg.lambda);
            axpy(&mut theta, -cfg.eta, &grad);
        }
        if !theta.is_finite() {
            return Err(ModelError::Diverged { epoch });
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub max_iters: usize,
    /// Stop once `‖∇h‖` falls to this level.
    pub grad_tol: f64,
    /// Declare failure if the final `‖∇h‖` exceeds this (convex models only).
    pub fail_above: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            max_iters: 2000,
            grad_tol: 1e-8,
            fail_above: 1e-5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub theta: ParamVector,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// High-accuracy minimizer of `h(·; θ_ref)` by full-batch gradient descent
/// with Armijo backtracking, started at `θ_ref`.
pub fn solve_prox_exact(
    theta_ref: &ParamVector,
    lambda: f64,
    ds: &Dataset,
    spec: &ModelSpec,
    opts: &OracleOptions,
) -> Result<OracleSolution, ModelError> {
    let eval = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let f = spec.loss_grad_unchecked(theta, ds, None, Some(grad));
        add_prox_term(grad, theta, theta_ref, lambda);
        f + 0.5 * lambda * crate::params::dist_sq(theta, theta_ref)
    };
    spec.check_inputs(theta_ref, ds)?;
    prox_objective(theta_ref, theta_ref, lambda, ds, spec)?;

    let d = theta_ref.dim();
    let mut theta = theta_ref.clone();
    let mut grad = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial_grad = vec![0.0; d];
    let mut value = eval(&theta, &mut grad);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        let g2 = norm_sq(&grad);
        if g2.sqrt() <= opts.grad_tol {
            break;
        }
        iterations += 1;
        loop {
            trial.copy_from_slice(&theta);
            axpy(&mut trial, -step, &grad);
            let v = eval(&trial, &mut trial_grad);
            if v <= value - 0.5 * step * g2 || step < 1e-16 {
                theta.copy_from_slice(&trial);
                grad.copy_from_slice(&trial_grad);
                value = v;
                break;
            }
            step *= 0.5;
        }
        step *= 2.0;
    }
    let grad_norm = norm_sq(&grad).sqrt();
    if spec.is_convex() && grad_norm > opts.fail_above {
        return Err(ModelError::OracleFailed { grad_norm, iterations });
    }
    Ok(OracleSolution {
        theta,
        value,
        grad_norm,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_synthetic_classification;
    use crate::model::{local_grad, prox_grad};

    fn problem() -> (Dataset, ModelSpec) {
        (
            gen_synthetic_classification(60, 3, 3, 1.0, 21).unwrap(),
            ModelSpec::logistic(3, 3),
        )
    }

    fn cfg(lambda: f64, eta: f64, epochs: usize, batch: usize) -> ProxConfig {
        ProxConfig { lambda, eta, epochs, batch }
    }

    #[test]
    fn deterministic_per_seed() {
        let (ds, spec) = problem();
        let init = ParamVector::zeros(spec.dim());
        let c = cfg(0.4, 0.05, 3, 8);
        let a = local_solve_sgd(&ds, &init, &c, 3, 77, &spec).unwrap();
        let b = local_solve_sgd(&ds, &init, &c, 3, 77, &spec).unwrap();
        let other = local_solve_sgd(&ds, &init, &c, 3, 78, &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, other);
    }

    #[test]
    fn huge_lambda_pins_iterate() {
        let (ds, spec) = problem();
        let init = ParamVector::from_vec((0..spec.dim()).map(|i| 0.1 * i as f64).collect());
        let lambda = 1e6;
        let out = local_solve_sgd(&ds, &init, &cfg(lambda, 1e-7, 5, 10), 5, 1, &spec).unwrap();
        let g0 = local_grad(&init, &ds, &spec).unwrap().norm();
        // Stationary point of h sits within ‖∇f‖/λ of the anchor.
        assert!(out.dist_sq(&init).sqrt() <= 2.0 * g0 / lambda, "{}", out.dist_sq(&init).sqrt());
    }

    #[test]
    fn long_run_reaches_prox_stationarity() {
        let (ds, spec) = problem();
        let init = ParamVector::zeros(spec.dim());
        let c = cfg(0.4, 0.2, 400, 60);
        let out = local_solve_sgd(&ds, &init, &c, 400, 5, &spec).unwrap();
        let oracle = solve_prox_exact(&init, 0.4, &ds, &spec, &OracleOptions::default()).unwrap();
        assert!(prox_grad(&out, &init, 0.4, &ds, &spec).unwrap().norm() < 1e-3);
        assert!(out.dist_sq(&oracle.theta).sqrt() < 1e-3);
    }

    #[test]
    fn divergence_reports_epoch() {
        let ds = gen_synthetic_classification(20, 2, 2, 50.0, 1).unwrap();
        let spec = ModelSpec::logistic(2, 2);
        let init = ParamVector::zeros(spec.dim());
        // Step far beyond 2/L on a proximal term with λ = 1e3 blows up geometrically.
        let err = local_solve_sgd(&ds, &init, &cfg(1e3, 10.0, 200, 20), 200, 1, &spec).unwrap_err();
        assert!(matches!(err, ModelError::Diverged { .. }), "{err:?}");
    }

    #[test]
    fn epoch_budget_checked() {
        let (ds, spec) = problem();
        let init = ParamVector::zeros(spec.dim());
        assert!(local_solve_sgd(&ds, &init, &cfg(0.1, 0.1, 3, 8), 4, 0, &spec).is_err());
        assert!(local_solve_sgd(&ds, &init, &cfg(0.1, 0.1, 3, 8), 0, 0, &spec).is_err());
    }

    #[test]
    fn oracle_converges_and_is_stationary() {
        let (ds, spec) = problem();
        let init = ParamVector::zeros(spec.dim());
        let sol = solve_prox_exact(&init, 0.4, &ds, &spec, &OracleOptions::default()).unwrap();
        assert!(sol.grad_norm <= 1e-8);
    }
}
