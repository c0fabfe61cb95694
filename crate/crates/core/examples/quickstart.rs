//! One NoROTA run on synthetic data with per-round metrics.
//!
//! `cargo run --release --example quickstart`

use ota_fl_sim::protocol::{run_training, DataSource, RunConfig};

fn main() -> ota_fl_sim::Result<()> {
    let cfg = RunConfig {
        rounds: 50,
        clients: 10,
        data: DataSource::Synthetic {
            samples: 2000,
            features: 10,
            classes: 10,
            separation: 2.0,
        },
        ..Default::default()
    };
    let run = run_training(&cfg)?;
    println!("sigma^2 resolved from {} dB: {:.3e}", cfg.snr_db.unwrap_or(f64::NAN), run.config.channel.sigma2);
    println!("{:>4} {:>10} {:>12} {:>9} {:>10}", "t", "loss", "|grad F|^2", "accuracy", "p_t");
    for r in run.records.iter().step_by(5) {
        println!(
            "{:>4} {:>10.5} {:>12.4e} {:>9.4} {:>10}",
            r.t,
            r.global_loss,
            r.grad_norm_sq,
            r.test_accuracy.unwrap_or(f64::NAN),
            r.p_t.map_or("-".into(), |p| format!("{p:.3e}"))
        );
    }
    println!("final accuracy {:.4}", run.final_accuracy().unwrap_or(0.0));
    Ok(())
}
