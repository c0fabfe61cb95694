//! Sweep of the fading threshold `r_hat`: too low admits weak channels and
//! amplifies noise, too high leaves few participants.
//!
//! `cargo run --release --example fading_sweep`

use std::collections::BTreeMap;

use ota_fl_sim::channel::{participation_probability, threshold_for_expected_participation};
use ota_fl_sim::harness::{run_sweep, SweepAxis, SweepSpec};
use ota_fl_sim::protocol::{DataSource, ProtocolVariant, RunConfig};

fn main() -> ota_fl_sim::Result<()> {
    let mut base = RunConfig {
        rounds: 60,
        clients: 30,
        pi: 0.1,
        track_gamma: false,
        data: DataSource::Synthetic {
            samples: 3000,
            features: 10,
            classes: 10,
            separation: 2.0,
        },
        ..Default::default()
    };
    base.channel.fading = true;
    let values: Vec<f64> = [0.01, threshold_for_expected_participation(30, 20.0), threshold_for_expected_participation(30, 1.0)].to_vec();
    let spec = SweepSpec {
        base,
        axis: SweepAxis::RHat,
        values: values.clone(),
        repeats: 2,
        variants: vec![ProtocolVariant::NoRota],
    };
    let dir = std::env::temp_dir().join("ota-fl-sim-fading-sweep");
    let out = run_sweep(&spec, &dir, 1, BTreeMap::new())?;
    for v in values {
        let accs: Vec<f64> = out.rows.iter().filter(|r| r.value == v).filter_map(|r| r.final_accuracy).collect();
        println!(
            "r_hat {v:.3}: expected participants {:>5.2}, mean accuracy {:.4}",
            30.0 * participation_probability(v),
            accs.iter().sum::<f64>() / accs.len() as f64
        );
    }
    println!("cells written under {}", out.dir.display());
    Ok(())
}
