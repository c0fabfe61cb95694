//! NoROTA keeps partial work from stragglers; COTAF drops them.
//!
//! `cargo run --release --example stragglers`

use ota_fl_sim::protocol::{run_training, DataSource, ProtocolVariant, RunConfig, StragglerModel};

fn main() -> ota_fl_sim::Result<()> {
    println!("{:>10} {:>8} {:>8}", "stragglers", "NoROTA", "COTAF");
    for fraction in [0.0, 0.5, 0.75] {
        let base = RunConfig {
            rounds: 60,
            clients: 30,
            pi: 0.1,
            epochs: 10,
            eta: 0.5,
            batch: 16,
            snr_db: Some(-5.0),
            track_gamma: false,
            straggler: StragglerModel {
                fraction,
                ..Default::default()
            },
            data: DataSource::Synthetic {
                samples: 3000,
                features: 10,
                classes: 30,
                separation: 2.0,
            },
            ..Default::default()
        };
        let acc = |variant| -> ota_fl_sim::Result<f64> {
            Ok(run_training(&RunConfig { variant, ..base.clone() })?.final_accuracy().unwrap_or(f64::NAN))
        };
        println!(
            "{:>9.0}% {:>8.4} {:>8.4}",
            100.0 * fraction,
            acc(ProtocolVariant::NoRota)?,
            acc(ProtocolVariant::Cotaf)?
        );
    }
    Ok(())
}
