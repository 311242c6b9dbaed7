//! `mimo-detect`: config-driven MIMO detection experiments.

use clap::{Parser, Subcommand};
use mimo_detect_cli::artifacts::Workspace;
use mimo_detect_cli::commands;
use mimo_detect_cli::config::ExperimentConfig;
use mimo_detect_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mimo-detect",
    about = "Simulate correlated MIMO channels, train hypernetwork detectors, benchmark SER",
    version
)]
struct Cli {
    /// Experiment configuration file (TOML); defaults reproduce the
    /// reference 4x2, 4-QAM system.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the experiment seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts and reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for bank building and evaluation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and archive the shared initial channel plus test sequences.
    GenChannels,
    /// Pretrain one detector per bank channel and persist the bank.
    BuildBank,
    /// Pretrain a single detector on the archived initial channel.
    PretrainOne,
    /// Train the hypernetwork (beta 0: plain; beta > 0: bank-regularized).
    Train {
        /// Override the regularizer weight from the config.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// SER versus SNR, pooled over all test-sequence hops.
    SerVsSnr,
    /// SER versus hop index at a fixed SNR.
    SerVsHop {
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
    },
    /// Bank artifact utilities.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
}

#[derive(Subcommand)]
enum BankAction {
    /// Print a summary of a bank manifest.
    Inspect {
        /// Bank directory (defaults to <out>/bank).
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set worker count: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let ws = Workspace::new(&cli.out);

    match cli.command {
        Command::GenChannels => {
            let archive = commands::cmd_gen_channels(&cfg, &ws)?;
            println!(
                "archived initial channel and {} sequences of length {} to {}",
                archive.sequences.len(),
                archive.meta.horizon,
                ws.channels_dir().display()
            );
        }
        Command::BuildBank => {
            let entries = commands::cmd_build_bank(&cfg, &ws)?;
            println!(
                "bank of {entries} pretrained detectors written to {}",
                ws.bank_dir().display()
            );
        }
        Command::PretrainOne => {
            let dir = commands::cmd_pretrain_one(&cfg, &ws)?;
            println!("single pretrained detector written to {}", dir.display());
        }
        Command::Train { beta } => {
            let outcome = commands::cmd_train(&cfg, &ws, beta, |row| {
                eprintln!(
                    "iteration {:>6}: loss {:.6} (data {:.6}, anchor {:.6}), lr {:.2e}",
                    row.iteration, row.loss_total, row.loss_a, row.loss_b, row.lr
                );
            })?;
            println!(
                "model written to {} (final loss {:.6}); log at {}",
                outcome.model_path.display(),
                outcome.final_loss,
                outcome.log_path.display()
            );
        }
        Command::SerVsSnr => {
            let path = commands::cmd_ser_vs_snr(&cfg, &ws)?;
            println!("report written to {}", path.display());
        }
        Command::SerVsHop { snr_db } => {
            let path = commands::cmd_ser_vs_hop(&cfg, &ws, snr_db)?;
            println!("report written to {}", path.display());
        }
        Command::Bank { action } => match action {
            BankAction::Inspect { path } => {
                let dir = path.unwrap_or_else(|| ws.bank_dir());
                print!("{}", commands::cmd_bank_inspect(&dir)?);
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
