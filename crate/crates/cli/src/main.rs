use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use locker_cli::pipeline::{evaluate_all, generate, report, selftest, train_all};
use locker_cli::{ExperimentConfig, Run, Scale};
use locker_core::selfcheck::Effort;

#[derive(Parser)]
#[command(
    name = "locker",
    version,
    about = "Parcel locker demand management experiments"
)]
struct Cli {
    /// Experiment config (TOML); presets fill in what it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Cross feature and allocation schemes of the value-based methods.
    #[arg(long, global = true)]
    mismatch: bool,
    #[arg(long, global = true, value_enum)]
    scale: Option<Scale>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the evaluation streams.
    Generate,
    /// Train the weights every value-based policy needs.
    Train,
    /// Simulate all policies and write the CSV reports.
    Evaluate,
    /// Summarize the results of `evaluate`.
    Report,
    /// Check the models against brute-force references.
    Selftest {
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    if let Command::Selftest { quick } = cli.command {
        let effort = if quick { Effort::Quick } else { Effort::Full };
        return selftest(effort, cli.seed.unwrap_or(1), &mut std::io::stdout());
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), cli.scale, cli.seed)?;
    let run = Run::new(cfg, cli.jobs, cli.mismatch);
    match cli.command {
        Command::Generate => {
            let paths = generate(&run)?;
            println!(
                "wrote {} streams to {}",
                paths.len(),
                run.cfg.output.join("streams").display()
            );
        }
        Command::Train => {
            let paths = train_all(&run)?;
            println!(
                "wrote {} weight files to {}",
                paths.len(),
                run.weights_dir().display()
            );
        }
        Command::Evaluate => {
            evaluate_all(&run)?;
            println!("wrote reports to {}", run.report_dir().display());
        }
        Command::Report => print!("{}", report(&run)?),
        Command::Selftest { .. } => unreachable!("handled above"),
    }
    Ok(true)
}
