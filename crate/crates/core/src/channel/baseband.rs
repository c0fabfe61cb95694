//! Complex baseband path used to validate the real-equivalent fading model.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChannelError, FadingDraw};

/// Transmit signal `x = (r̂√pᵗ/r) e^{−jΩ} Δ`, or `None` when `r ≤ r̂`.
pub fn encode_fading_complex(
    theta_k: &[f64],
    theta_prev: &[f64],
    p_t: f64,
    draw: &FadingDraw,
    r_hat: f64,
) -> Result<Option<Vec<Complex64>>, ChannelError> {
    if !draw.participates(r_hat) {
        return Ok(None);
    }
    let real = super::encode(theta_k, theta_prev, p_t)?;
    let gain = Complex64::from_polar(r_hat / draw.r, -draw.omega);
    Ok(Some(real.into_iter().map(|v| gain * v).collect()))
}

/// Multiplies a transmit signal by the channel coefficient `r e^{jΩ}`.
pub fn apply_channel(x: &[Complex64], draw: &FadingDraw) -> Vec<Complex64> {
    let h = Complex64::from_polar(draw.r, draw.omega);
    x.iter().map(|v| h * v).collect()
}

/// Complex superposition. The real parts of the noise are drawn first and in
/// the same order as [`super::mac_superpose`], so the real part of the output
/// carries the same noise realization.
pub fn mac_superpose_complex<R: Rng + ?Sized>(
    inputs: &[Vec<Complex64>],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>, ChannelError> {
    let first = inputs
        .first()
        .ok_or_else(|| ChannelError::InvalidArgument("no channel inputs".into()))?;
    let mut y = first.clone();
    for x in &inputs[1..] {
        if x.len() != y.len() {
            return Err(ChannelError::DimensionMismatch {
                expected: y.len(),
                got: x.len(),
            });
        }
        y.iter_mut().zip(x).for_each(|(a, b)| *a += b);
    }
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        for v in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            v.re += sd * z;
        }
        for v in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            v.im += sd * z;
        }
    }
    Ok(y)
}
