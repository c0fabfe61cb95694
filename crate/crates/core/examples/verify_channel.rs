//! Monte-Carlo check of the decoded-noise variance of the full, partial and
//! fading decoders against their closed forms.
//!
//! `cargo run --release --example verify_channel`

use ota_fl_sim::harness::{verify_channel, VerifyConfig};

fn main() -> ota_fl_sim::Result<()> {
    let report = verify_channel(&VerifyConfig::default())?;
    print!("{}", report.render());
    std::process::exit(report.exit_code());
}
