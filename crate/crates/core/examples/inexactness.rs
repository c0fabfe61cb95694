//! Local inexactness `gamma` and suboptimality `zeta` shrink with more
//! local epochs of full-batch descent.
//!
//! `cargo run --release --example inexactness`

use ota_fl_sim::datagen::gen_synthetic_classification;
use ota_fl_sim::model::{local_solve_sgd, logistic_smoothness, measure_gamma, measure_zeta, ModelSpec, ProxConfig};

fn main() -> ota_fl_sim::Result<()> {
    let ds = gen_synthetic_classification(200, 5, 4, 1.5, 5)?;
    let spec = ModelSpec::logistic(5, 4);
    let lambda = 0.5;
    let theta_ref = spec.init_params(3);
    let cfg = ProxConfig {
        lambda,
        eta: 1.0 / (logistic_smoothness(&ds) + lambda),
        epochs: 16,
        batch: ds.len(),
    };
    println!("{:>6} {:>12} {:>12}", "epochs", "gamma", "zeta");
    for e in [1, 2, 4, 8, 16] {
        let out = local_solve_sgd(&ds, &theta_ref, &cfg, e, 9, &spec)?;
        let gamma = measure_gamma(&out, &theta_ref, lambda, &ds, &spec)?.gamma_hat.unwrap_or(f64::NAN);
        let zeta = measure_zeta(&out, &theta_ref, lambda, &ds, &spec, 5000)?;
        println!("{e:>6} {gamma:>12.4e} {zeta:>12.4e}");
    }
    Ok(())
}
