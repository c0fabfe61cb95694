use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use ota_fl_sim::harness::{
    cli_compare, cli_emit_plot_data, cli_run, cli_sweep, cli_verify_channel, error_exit_code, load_config, output_root,
    VerifyConfig, EXIT_DIVERGED, EXIT_OK, OUT_ENV,
};
use ota_fl_sim::protocol::ProtocolVariant;

#[derive(Parser)]
#[command(version, about = "Proximal over-the-air federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output root directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Replace the master seed of the config.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Run every cell of a sweep config.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run one config under several protocol variants with a shared seed.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Comma-separated variants; all when omitted.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<ProtocolVariant>,
    },
    /// Monte-Carlo check of the decoded-noise laws.
    VerifyChannel {
        /// Take K, K_hat, P, noise and r_hat from a config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long)]
        seed_override: Option<u64>,
        /// Also write the report as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge run directories into a long-format CSV.
    EmitPlotData {
        /// rounds.csv column to extract.
        #[arg(long, default_value = "accuracy")]
        metric: String,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
}

fn execute(cmd: Command) -> ota_fl_sim::Result<i32> {
    match cmd {
        Command::Run(c) => {
            let o = cli_run(&c.config, &output_root(c.out), c.seed_override)?;
            println!("{}", o.dir.display());
            if let Some(t) = o.result.diverged_at {
                eprintln!("diverged in round {t}");
            }
            Ok(o.exit_code())
        }
        Command::Sweep { common: c, jobs } => {
            let o = cli_sweep(&c.config, &output_root(c.out), jobs, c.seed_override)?;
            println!("{}", o.dir.join("sweep.csv").display());
            Ok(if o.rows.iter().any(|r| r.diverged_at.is_some()) { EXIT_DIVERGED } else { EXIT_OK })
        }
        Command::Compare { common: c, jobs, variants } => {
            let variants = if variants.is_empty() { ProtocolVariant::ALL.to_vec() } else { variants };
            let o = cli_compare(&c.config, &variants, &output_root(c.out), jobs, c.seed_override)?;
            println!("{:<12} {:>10} {:>12} {:>14}", "variant", "accuracy", "loss", "|grad F|^2");
            for r in &o.rows {
                let acc = r.final_accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
                println!("{:<12} {:>10} {:>12.6} {:>14.6e}", r.variant.name(), acc, r.final_loss, r.final_grad_norm_sq);
            }
            println!("{}", o.dir.join("compare.csv").display());
            Ok(if o.rows.iter().any(|r| r.diverged_at.is_some()) { EXIT_DIVERGED } else { EXIT_OK })
        }
        Command::VerifyChannel { config, trials, seed_override, out } => {
            let mut vc = match config {
                Some(p) => VerifyConfig::from_run_config(&load_config(&p)?.0.run),
                None => VerifyConfig::default(),
            };
            if let Some(s) = seed_override {
                vc.seed = s;
            }
            let report = cli_verify_channel(trials, &vc)?;
            print!("{}", report.render());
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report)?;
                std::fs::write(&path, json).map_err(|e| ota_fl_sim::Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
            }
            Ok(report.exit_code())
        }
        Command::EmitPlotData { metric, out, run_dirs } => {
            let s = cli_emit_plot_data(&run_dirs, &metric, &out)?;
            println!("{} rows ({} runs x {} rounds) -> {}", s.rows, s.runs, s.rounds, out.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
