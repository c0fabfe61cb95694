use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One client's block-fading coefficient `r e^{jΩ}` for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingDraw {
    pub r: f64,
    pub omega: f64,
}

impl FadingDraw {
    /// Strict threshold test `r > r̂`.
    pub fn participates(&self, r_hat: f64) -> bool {
        self.r > r_hat
    }
}

/// Draws `k` i.i.d. Rayleigh magnitudes with `E[r²] = 1` and uniform phases.
pub fn draw_fading<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<FadingDraw> {
    (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            let omega = rng.random::<f64>() * TAU;
            FadingDraw { r: e.sqrt(), omega }
        })
        .collect()
}

/// `P(r > r̂) = exp(−r̂²)`.
pub fn participation_probability(r_hat: f64) -> f64 {
    (-r_hat * r_hat).exp()
}

/// Threshold `r̂` at which `target` of `k` clients participate on average.
pub fn threshold_for_expected_participation(k: usize, target: f64) -> f64 {
    let frac = (target / k as f64).clamp(f64::MIN_POSITIVE, 1.0);
    (-frac.ln()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn mean_square_is_one() {
        let draws = draw_fading(100_000, &mut rng_from_seed(1));
        let ms = draws.iter().map(|d| d.r * d.r).sum::<f64>() / draws.len() as f64;
        assert!((ms - 1.0).abs() < 0.02, "{ms}");
        assert!(draws.iter().all(|d| (0.0..TAU).contains(&d.omega)));
    }

    #[test]
    fn threshold_inversion() {
        let r = threshold_for_expected_participation(30, 20.0);
        assert!((r - (-(2.0f64 / 3.0).ln()).sqrt()).abs() < 1e-15);
        assert!((participation_probability(r) * 30.0 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(draw_fading(5, &mut rng_from_seed(4)), draw_fading(5, &mut rng_from_seed(4)));
    }
}
