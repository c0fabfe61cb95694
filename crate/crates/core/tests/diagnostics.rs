use proptest::prelude::*;

use ota_fl_sim::datagen::{gen_synthetic_classification, ClientShard, Dataset};
use ota_fl_sim::diagnostics::{
    diagnose, estimate_bh, evaluate_accuracy, fit_rate_series, global_stats, LgdPoint, RateOptions, Smoothing,
};
use ota_fl_sim::model::{local_grad, ModelSpec};
use ota_fl_sim::protocol::{run_training, DataSource, RunConfig};

/// Global norms stay in `(0, 1]` so one grid step in `b` moves `h` by at most
/// one grid step.
fn points() -> impl Strategy<Value = Vec<LgdPoint>> {
    prop::collection::vec((0.01f64..=1.0, 0.0f64..10.0), 2..=20).prop_map(|v| {
        v.into_iter()
            .map(|(x, y)| LgdPoint {
                global_sq: x,
                local_mean_sq: y,
            })
            .collect()
    })
}

/// Brute-force envelope: `b` on a `step` grid, each with its smallest covering
/// `h`, minimizing `b·x̄ + h` with ties to smaller `b`.
fn grid(points: &[LgdPoint], step: f64) -> (f64, f64) {
    let x_mean = points.iter().map(|p| p.global_sq).sum::<f64>() / points.len() as f64;
    let b_max = points
        .iter()
        .map(|p| p.local_mean_sq / p.global_sq)
        .fold(0.0, f64::max)
        + 2.0 * step;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=((b_max / step).ceil() as usize) {
        let b = i as f64 * step;
        let h = points
            .iter()
            .map(|p| p.local_mean_sq - b * p.global_sq)
            .fold(0.0, f64::max);
        let obj = b * x_mean + h;
        if obj < best.0 - 1e-12 {
            best = (obj, b, h);
        }
    }
    (best.1, best.2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn envelope_covers_every_point(pts in points()) {
        let est = estimate_bh(&pts).unwrap();
        for p in &pts {
            prop_assert!(p.local_mean_sq <= est.b_hat * est.b_hat * p.global_sq + est.h_hat * est.h_hat + 1e-9);
        }
        prop_assert!(est.max_violation <= 1e-9);
    }

    #[test]
    fn envelope_matches_grid_search(pts in points()) {
        let est = estimate_bh(&pts).unwrap();
        let step = 1e-3;
        let (b, h) = grid(&pts, step);
        prop_assert!((b - est.b_sq).abs() <= 2.0 * step, "b {} vs {}", b, est.b_sq);
        prop_assert!((h - est.h_sq).abs() <= 2.0 * step, "h {} vs {}", h, est.h_sq);
    }

    #[test]
    fn rate_fit_recovers_exponents(c in 0.1f64..10.0, alpha in prop::sample::select(vec![-1.0, -0.5])) {
        let series: Vec<(f64, f64)> = (1..=100).map(|t| (t as f64, c * (t as f64).powf(alpha))).collect();
        let opts = RateOptions { smoothing: Smoothing::None, ..Default::default() };
        let fit = fit_rate_series(&series, &opts).unwrap();
        prop_assert!((fit.slope - alpha).abs() <= 0.01);
    }
}

fn balanced() -> Dataset {
    gen_synthetic_classification(90, 4, 3, 2.0, 2).unwrap()
}

#[test]
fn zero_model_predicts_lowest_class() {
    let ds = balanced();
    let spec = ModelSpec::logistic(4, 3);
    let acc = evaluate_accuracy(&vec![0.0; spec.dim()], &ds, &spec).unwrap();
    assert_eq!(acc, 1.0 / 3.0);
    let twice = evaluate_accuracy(&vec![0.0; spec.dim()], &ds.repeated(2), &spec).unwrap();
    assert_eq!(acc, twice);
}

#[test]
fn global_gradient_is_the_client_mean() {
    let a = gen_synthetic_classification(30, 4, 3, 2.0, 3).unwrap();
    let b = gen_synthetic_classification(50, 4, 3, 2.0, 4).unwrap();
    let spec = ModelSpec::logistic(4, 3);
    let theta: Vec<f64> = (0..spec.dim()).map(|i| 0.05 * i as f64 - 0.3).collect();
    let ga = local_grad(&theta, &a, &spec).unwrap();
    let gb = local_grad(&theta, &b, &spec).unwrap();
    let mean: Vec<f64> = ga.as_slice().iter().zip(gb.as_slice()).map(|(x, y)| 0.5 * (x + y)).collect();
    let expected: f64 = mean.iter().map(|v| v * v).sum();
    let shards = [ClientShard::single(a), ClientShard::single(b)];
    let stats = global_stats(&theta, &shards, &spec).unwrap();
    assert!((stats.grad_norm_sq - expected).abs() <= 1e-12 * expected.max(1.0));
    let local_mean = 0.5 * (ga.norm_sq() + gb.norm_sq());
    assert!((stats.local_grad_sq_mean - local_mean).abs() <= 1e-12 * local_mean.max(1.0));
}

#[test]
fn diagnostics_do_not_touch_records() {
    let cfg = RunConfig {
        rounds: 30,
        clients: 5,
        data: DataSource::Synthetic {
            samples: 500,
            features: 5,
            classes: 5,
            separation: 2.0,
        },
        ..Default::default()
    };
    let run = run_training(&cfg).unwrap();
    let before = run.records.clone();
    let report = diagnose(&run.records, cfg.channel.power).unwrap();
    assert_eq!(before, run.records);
    assert!(report.b_hat.is_finite() && report.h_hat.is_finite());
    assert!((0.0..=1.0).contains(&report.bound_satisfaction));
}
