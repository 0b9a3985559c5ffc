use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nullwave::cli::{run_cli, Command, Options};

/// Characteristic-grid wave simulator with weighted energy diagnostics.
#[derive(Parser)]
#[command(name = "nullwave", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reject configs that request randomness.
    #[arg(long)]
    seedless: bool,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = Options { out: args.out, seedless: args.seedless, quiet: args.quiet };
    ExitCode::from(run_cli(args.command, &args.config, &opts) as u8)
}
