use std::path::PathBuf;
use std::process::ExitCode;

use breakcast_cli::config::{config_from_overrides, load_config, RunConfig};
use breakcast_cli::{commands, resolve_output_root, CliError};
use clap::{Args, Parser, Subcommand};

/// Break-aware, wavelet-denoised one-step price forecasting.
#[derive(Parser)]
#[command(name = "breakcast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration JSON; omit to start from built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory that receives timestamped run directories.
    #[arg(long)]
    output_root: Option<PathBuf>,
    /// Field overrides as `--dotted.path value` pairs, e.g.
    /// `--training.max_epochs 5 --wavelet.family haar`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect structural breakpoints per column and export them as JSON.
    Detect(CommonArgs),
    /// Export the wavelet-denoised target series as CSV.
    Denoise(CommonArgs),
    /// Train the configured architectures, saving checkpoints and histories.
    Train(CommonArgs),
    /// Evaluate a saved checkpoint on the configured test split.
    Evaluate {
        /// Model checkpoint produced by `train` or `pipeline`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full run: detect, denoise, train, evaluate, and rank all variants.
    Pipeline(CommonArgs),
}

fn load(common: &CommonArgs) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => load_config(path, &common.overrides),
        None => config_from_overrides(&common.overrides),
    }
}

fn run() -> Result<PathBuf, CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Detect(common) => {
            let config = load(common)?;
            let root = resolve_output_root(common.output_root.clone(), &config);
            commands::cmd_detect(&config, &root)
        }
        Command::Denoise(common) => {
            let config = load(common)?;
            let root = resolve_output_root(common.output_root.clone(), &config);
            commands::cmd_denoise(&config, &root)
        }
        Command::Train(common) => {
            let config = load(common)?;
            let root = resolve_output_root(common.output_root.clone(), &config);
            commands::cmd_train(&config, &root)
        }
        Command::Evaluate { checkpoint, common } => {
            let config = load(common)?;
            let root = resolve_output_root(common.output_root.clone(), &config);
            commands::cmd_evaluate(&config, checkpoint, &root)
        }
        Command::Pipeline(common) => {
            let config = load(common)?;
            let root = resolve_output_root(common.output_root.clone(), &config);
            commands::cmd_pipeline(&config, &root)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
