//! Command-line driver for the NDVQ toy codec.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ndvq", version, about = "Train, run and inspect the NDVQ toy audio codec")]
struct Cli {
    /// Seed for every random stream; overrides `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML experiment configuration; built-in acceptance defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted `key=value` override, for example `train.steps=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on synthetic clips and write checkpoints plus the loss history.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress a 16-bit mono WAV file into a bitstream.
    Encode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Target bandwidth in kbps; all layers when absent.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Reconstruct a WAV file from a bitstream using code means.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate a checkpoint at one or more bandwidths.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of WAV files; the held-out synthetic split of the checkpoint config when absent.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Bandwidths in kbps, comma separated or repeated.
        #[arg(long, value_delimiter = ',')]
        bandwidth: Vec<f64>,
        /// Directory for `report_<kbps>.txt` and `report_<kbps>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print codebook geometry, sigma ranges and per-layer usage entropy.
    Stats {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of WAV files for usage statistics.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Use the held-out synthetic split for usage statistics.
        #[arg(long, conflicts_with = "data_dir")]
        synthetic: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out } => commands::train(config.config.as_deref(), &config.overrides, cli.seed, &out),
        Command::Encode { checkpoint, input, output, bandwidth } => {
            commands::encode(&checkpoint, &input, &output, bandwidth)
        }
        Command::Decode { checkpoint, input, output } => commands::decode(&checkpoint, &input, &output),
        Command::Eval { checkpoint, data_dir, bandwidth, out } => {
            commands::eval(&checkpoint, data_dir.as_deref(), &bandwidth, out.as_deref(), cli.seed)
        }
        Command::Stats { checkpoint, data_dir, synthetic } => {
            commands::stats(&checkpoint, data_dir.as_deref(), synthetic, cli.seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
