//! Gradient-dissimilarity envelope, precoding bound check, the lambda
//! condition and the convergence-rate fit of a convex run.
//!
//! `cargo run --release --example lgd_diagnostics`

use ota_fl_sim::diagnostics::{
    check_gradient_bound, check_precoding_bound, estimate_bh, fit_rate, lambda_threshold, lgd_points, max_gamma_hat,
    RateMetric, RateOptions,
};
use ota_fl_sim::model::logistic_smoothness;
use ota_fl_sim::protocol::{prepare, run_experiment, DataSource, RunConfig, RunOptions};

fn main() -> ota_fl_sim::Result<()> {
    let cfg = RunConfig {
        rounds: 200,
        clients: 30,
        pi: 1.0,
        data: DataSource::Synthetic {
            samples: 3000,
            features: 10,
            classes: 10,
            separation: 2.0,
        },
        ..Default::default()
    };
    let exp = prepare(&cfg)?;
    let run = run_experiment(&exp, &RunOptions::default())?;

    let lgd = estimate_bh(&lgd_points(&run.records))?;
    println!("B_hat {:.4}  H_hat {:.4}  ({} points)", lgd.b_hat, lgd.h_hat, lgd.n_points);

    let power = run.config.channel.power;
    let bound = check_precoding_bound(&run.records, lgd.b_hat, lgd.h_hat, power);
    println!("1/p_t <= (B^2 |grad F|^2 + H^2)/P in {:.1}% of {} rounds", 100.0 * bound.fraction, bound.checked);
    let g_bound = check_gradient_bound(&run.records, power);
    println!("1/p_t <= G^2/P in {:.1}% of rounds", 100.0 * g_bound.fraction);

    let smooth = exp.shards.iter().map(|s| logistic_smoothness(&s.dataset)).fold(0.0, f64::max);
    let gamma = max_gamma_hat(&run.records).unwrap_or(0.0);
    let tau = run.config.channel.snr(run.spec.dim());
    println!(
        "lambda {} vs threshold gamma L / (K sqrt(tau)) = {:.4e} (gamma {:.3}, L {:.3}, tau {:.3})",
        run.config.lambda,
        lambda_threshold(gamma, smooth, run.config.clients, tau),
        gamma,
        smooth,
        tau
    );

    let fit = fit_rate(&run.records, RateMetric::GradNormSq, &RateOptions::default())?;
    println!("running-mean |grad F|^2 ~ t^{:.3} (r2 {:.3})", fit.slope, fit.r2);
    Ok(())
}
