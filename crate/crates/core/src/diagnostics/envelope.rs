//! Upper envelope `y ≤ b·x + h` of local-vs-global gradient samples.

use serde::{Deserialize, Serialize};

use super::DiagnosticsError;

/// One round's gradient sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LgdPoint {
    /// `‖∇F‖²`.
    pub global_sq: f64,
    /// `E_k‖∇f_k‖²`.
    pub local_mean_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgdEstimate {
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    #[serde(rename = "H_hat")]
    pub h_hat: f64,
    /// `B̂²`, the envelope slope.
    pub b_sq: f64,
    /// `Ĥ²`, the envelope intercept.
    pub h_sq: f64,
    pub n_points: usize,
    /// `max_i (yᵢ − b·xᵢ − h)`; never positive beyond rounding.
    pub max_violation: f64,
}

/// Envelope area objective, up to a positive factor: the area under
/// `b·x + h` over `[0, 2x̄]` is `2x̄(b·x̄ + h)`.
fn intercept(points: &[LgdPoint], b: f64) -> f64 {
    points
        .iter()
        .map(|p| p.local_mean_sq - b * p.global_sq)
        .fold(0.0, f64::max)
}

/// Minimal-area upper envelope `(b, h)` with `b, h ≥ 0` and
/// `yᵢ ≤ b·xᵢ + h` for every point, where `x = ‖∇F‖²`, `y = E_k‖∇f_k‖²`.
///
/// The objective is convex and piecewise linear in `b` with breakpoints at
/// the upper-hull edge slopes and at `max yᵢ/xᵢ`, so only those candidates
/// (plus `b = 0`) are evaluated. Ties go to the smaller `b`, then the
/// smaller `h`. Returns `B̂ = √b` and `Ĥ = √h`.
pub fn estimate_bh(points: &[LgdPoint]) -> Result<LgdEstimate, DiagnosticsError> {
    if points.len() < 2 {
        return Err(DiagnosticsError::InsufficientData(format!(
            "envelope needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| !(p.global_sq.is_finite() && p.local_mean_sq.is_finite()) || p.global_sq < 0.0)
    {
        return Err(DiagnosticsError::InvalidArgument("non-finite or negative gradient sample".into()));
    }
    let x_mean = points.iter().map(|p| p.global_sq).sum::<f64>() / points.len() as f64;

    let mut candidates = vec![0.0];
    let hull = upper_hull(points);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (b.1 - a.1) / (b.0 - a.0);
        if slope > 0.0 && slope.is_finite() {
            candidates.push(slope);
        }
    }
    if let Some(ratio) = points
        .iter()
        .filter(|p| p.global_sq > 0.0)
        .map(|p| p.local_mean_sq / p.global_sq)
        .reduce(f64::max)
    {
        if ratio > 0.0 {
            candidates.push(ratio);
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let scored: Vec<(f64, f64, f64)> = candidates
        .iter()
        .map(|&b| {
            let h = intercept(points, b);
            (b, h, b * x_mean + h)
        })
        .collect();
    let best = scored.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * best.abs().max(f64::MIN_POSITIVE);
    let &(b, h, _) = scored
        .iter()
        .find(|s| s.2 <= best + tol)
        .expect("at least one candidate");
    let max_violation = points
        .iter()
        .map(|p| p.local_mean_sq - b * p.global_sq - h)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LgdEstimate {
        b_hat: b.sqrt(),
        h_hat: h.sqrt(),
        b_sq: b,
        h_sq: h,
        n_points: points.len(),
        max_violation,
    })
}

/// Upper convex hull, left to right; for equal `x` only the highest point.
fn upper_hull(points: &[LgdPoint]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.global_sq, p.local_mean_sq)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|a, b| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<LgdPoint> {
        v.iter()
            .map(|&(x, y)| LgdPoint {
                global_sq: x,
                local_mean_sq: y,
            })
            .collect()
    }

    #[test]
    fn two_point_example() {
        let e = estimate_bh(&pts(&[(1.0, 2.0), (4.0, 5.0)])).unwrap();
        assert!((e.b_sq - 1.0).abs() < 1e-12 && (e.h_sq - 1.0).abs() < 1e-12, "{e:?}");
        assert!(e.max_violation <= 1e-12);
    }

    #[test]
    fn identity_line() {
        let e = estimate_bh(&pts(&[(0.5, 0.5), (1.0, 1.0), (3.0, 3.0)])).unwrap();
        assert_eq!((e.b_hat, e.h_hat), (1.0, 0.0));
    }

    #[test]
    fn identical_points() {
        let e = estimate_bh(&pts(&[(2.0, 3.0), (2.0, 3.0), (2.0, 3.0)])).unwrap();
        assert_eq!(e.b_hat, 0.0);
        assert_eq!(e.h_sq, 3.0);
    }

    #[test]
    fn rejects_single_point() {
        assert!(estimate_bh(&pts(&[(1.0, 1.0)])).is_err());
    }
}
