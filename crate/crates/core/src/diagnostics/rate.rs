//! Log-log slope fits of convergence metrics.

use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::protocol::RoundRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMetric {
    GradNormSq,
    /// `F(θ̃ᵗ) − f_star`.
    LossGap { f_star: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Fit the running mean `(1/t) Σ_{s≤t} a_s`.
    #[default]
    RunningMean,
    /// Fit the raw values.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOptions {
    pub smoothing: Smoothing,
    /// Minimum number of usable points.
    pub min_window: usize,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            smoothing: Smoothing::RunningMean,
            min_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points used in the fit.
    pub window: usize,
    /// Non-positive or non-finite values dropped before fitting.
    pub filtered: usize,
}

/// Fits `log(metric) = slope · log(t) + c` over the rounds `t ≥ 1`.
pub fn fit_rate(records: &[RoundRecord], metric: RateMetric, opts: &RateOptions) -> Result<RateFit, DiagnosticsError> {
    let series: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= 1)
        .map(|r| {
            let v = match metric {
                RateMetric::GradNormSq => r.grad_norm_sq,
                RateMetric::LossGap { f_star } => r.global_loss - f_star,
            };
            (r.t as f64, v)
        })
        .collect();
    fit_rate_series(&series, opts)
}

/// Fits a `(t, value)` series with `t > 0`.
pub fn fit_rate_series(series: &[(f64, f64)], opts: &RateOptions) -> Result<RateFit, DiagnosticsError> {
    let kept: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, v)| t > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    let filtered = series.len() - kept.len();
    let window = opts.min_window.max(2);
    if kept.len() < window {
        return Err(DiagnosticsError::InsufficientData(format!(
            "rate fit needs {window} positive values, got {}",
            kept.len()
        )));
    }
    let mut sum = 0.0;
    let pts: Vec<(f64, f64)> = kept
        .iter()
        .enumerate()
        .map(|(i, &(t, v))| {
            let y = match opts.smoothing {
                Smoothing::RunningMean => {
                    sum += v;
                    sum / (i + 1) as f64
                }
                Smoothing::None => v,
            };
            (t.ln(), y.ln())
        })
        .collect();
    let (slope, intercept, r2) = least_squares(&pts);
    Ok(RateFit {
        slope,
        intercept,
        r2,
        window: pts.len(),
        filtered,
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw() -> RateOptions {
        RateOptions {
            smoothing: Smoothing::None,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_power_laws() {
        let inv: Vec<(f64, f64)> = (1..=200).map(|t| (t as f64, 3.0 / t as f64)).collect();
        assert!((fit_rate_series(&inv, &raw()).unwrap().slope + 1.0).abs() < 1e-12);
        let sqrt: Vec<(f64, f64)> = (1..=200).map(|t| (t as f64, 3.0 / (t as f64).sqrt())).collect();
        assert!((fit_rate_series(&sqrt, &raw()).unwrap().slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn running_mean_of_constant_is_flat() {
        let c: Vec<(f64, f64)> = (1..=50).map(|t| (t as f64, 2.0)).collect();
        let fit = fit_rate_series(&c, &RateOptions::default()).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn filters_nonpositive() {
        let mut s: Vec<(f64, f64)> = (1..=20).map(|t| (t as f64, 1.0 / t as f64)).collect();
        s[3].1 = 0.0;
        s[7].1 = -1.0;
        let fit = fit_rate_series(&s, &raw()).unwrap();
        assert_eq!(fit.filtered, 2);
        assert_eq!(fit.window, 18);
    }

    #[test]
    fn short_series_rejected() {
        let s: Vec<(f64, f64)> = (1..=5).map(|t| (t as f64, 1.0)).collect();
        assert!(fit_rate_series(&s, &raw()).is_err());
    }
}
