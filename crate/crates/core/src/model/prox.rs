//! Local loss `f_k`, its gradient, and the proximal surrogate
//! `h_k(θ; θ_ref) = f_k(θ) + (λ/2)‖θ − θ_ref‖²`.

use super::{ModelError, ModelSpec};
use crate::datagen::Dataset;
use crate::params::{dist_sq, ParamVector};

pub fn local_loss(theta: &[f64], ds: &Dataset, spec: &ModelSpec) -> Result<f64, ModelError> {
    spec.check_inputs(theta, ds)?;
    Ok(spec.loss_grad_unchecked(theta, ds, None, None))
}

pub fn local_grad(theta: &[f64], ds: &Dataset, spec: &ModelSpec) -> Result<ParamVector, ModelError> {
    Ok(local_loss_grad(theta, ds, spec)?.1)
}

/// Loss and full-batch gradient in one pass.
pub fn local_loss_grad(
    theta: &[f64],
    ds: &Dataset,
    spec: &ModelSpec,
) -> Result<(f64, ParamVector), ModelError> {
    spec.check_inputs(theta, ds)?;
    let mut g = ParamVector::zeros(theta.len());
    let loss = spec.loss_grad_unchecked(theta, ds, None, Some(&mut g));
    Ok((loss, g))
}

fn check_ref(theta: &[f64], theta_ref: &[f64], lambda: f64) -> Result<(), ModelError> {
    if theta_ref.len() != theta.len() {
        return Err(ModelError::DimensionMismatch {
            expected: theta.len(),
            got: theta_ref.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(ModelError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

pub fn prox_objective(
    theta: &[f64],
    theta_ref: &[f64],
    lambda: f64,
    ds: &Dataset,
    spec: &ModelSpec,
) -> Result<f64, ModelError> {
    check_ref(theta, theta_ref, lambda)?;
    let f = local_loss(theta, ds, spec)?;
    if lambda == 0.0 {
        return Ok(f);
    }
    Ok(f + 0.5 * lambda * dist_sq(theta, theta_ref))
}

/// `∇h = ∇f_k + λ(θ − θ_ref)`.
pub fn prox_grad(
    theta: &[f64],
    theta_ref: &[f64],
    lambda: f64,
    ds: &Dataset,
    spec: &ModelSpec,
) -> Result<ParamVector, ModelError> {
    check_ref(theta, theta_ref, lambda)?;
    let mut g = local_grad(theta, ds, spec)?;
    add_prox_term(&mut g, theta, theta_ref, lambda);
    Ok(g)
}

pub(crate) fn add_prox_term(g: &mut [f64], theta: &[f64], theta_ref: &[f64], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for ((gi, t), r) in g.iter_mut().zip(theta).zip(theta_ref) {
        *gi += lambda * (t - r);
    }
}
