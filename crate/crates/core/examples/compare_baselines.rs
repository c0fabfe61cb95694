//! Every protocol variant on one configuration and seed.
//!
//! `cargo run --release --example compare_baselines`

use ota_fl_sim::protocol::{run_training, DataSource, ProtocolVariant, RunConfig, StragglerModel};

fn main() -> ota_fl_sim::Result<()> {
    let base = RunConfig {
        rounds: 60,
        clients: 20,
        pi: 0.2,
        snr_db: Some(-5.0),
        straggler: StragglerModel {
            fraction: 0.5,
            ..Default::default()
        },
        data: DataSource::Synthetic {
            samples: 3000,
            features: 10,
            classes: 10,
            separation: 2.0,
        },
        track_gamma: false,
        ..Default::default()
    };
    println!("{:<12} {:>8} {:>8} {:>10}", "variant", "lambda", "acc", "loss");
    for variant in ProtocolVariant::ALL {
        let run = run_training(&RunConfig { variant, ..base.clone() })?;
        let last = run.records.last().expect("initial record");
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>10.5}",
            variant.name(),
            run.config.lambda,
            run.final_accuracy().unwrap_or(f64::NAN),
            last.global_loss
        );
    }
    Ok(())
}
