//! Trains from a CSV file, saves the final model as a checkpoint and
//! evaluates the reloaded model.
//!
//! `cargo run --release --example csv_and_checkpoint`

use ota_fl_sim::datagen::{gen_synthetic_classification, write_csv_dataset};
use ota_fl_sim::diagnostics::evaluate_accuracy;
use ota_fl_sim::model::{read_checkpoint, write_checkpoint};
use ota_fl_sim::protocol::{prepare, run_experiment, DataSource, RunConfig, RunOptions};

fn main() -> ota_fl_sim::Result<()> {
    let dir = std::env::temp_dir().join("ota-fl-sim-csv-example");
    std::fs::create_dir_all(&dir).map_err(|e| ota_fl_sim::Error::io(&dir, e))?;
    let csv = dir.join("data.csv");
    write_csv_dataset(&gen_synthetic_classification(1500, 6, 5, 2.0, 17)?, &csv)?;

    let cfg = RunConfig {
        rounds: 40,
        clients: 10,
        data: DataSource::Csv {
            path: csv.clone(),
            label_column: "label".into(),
            feature_columns: Vec::new(),
            normalize: true,
        },
        ..Default::default()
    };
    let exp = prepare(&cfg)?;
    let run = run_experiment(&exp, &RunOptions::default())?;
    println!("trained on {} ({} test rows)", csv.display(), exp.test.len());

    let ckpt = dir.join("model.bin");
    write_checkpoint(&ckpt, &run.final_theta, &run.spec)?;
    let (theta, spec) = read_checkpoint(&ckpt)?;
    let acc = evaluate_accuracy(theta.as_slice(), &exp.test, &spec)?;
    println!("checkpoint {} (d = {}) accuracy {:.4}", ckpt.display(), spec.dim(), acc);
    assert_eq!(Some(acc), run.final_accuracy());
    Ok(())
}
