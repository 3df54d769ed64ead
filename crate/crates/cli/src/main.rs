use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod run;

#[derive(Parser)]
#[command(name = "graphspde", version, about = "Matérn-driven stochastic diffusion on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration. Keys left out take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; replaces the configured seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dense spectral kernel matrix of the configured graph.
    Kernel(Common),
    /// Gaussian random field draws and one Φ-Wiener path.
    Sample(Common),
    /// Train the stochastic diffusion model on one split.
    Train(Common),
    /// Full OOD experiment over every configured seed.
    EvalOod(Common),
    /// Label informativeness and edge homophily.
    Li(Common),
    /// Covariance-threshold rewiring.
    Rewire(Common),
    /// Chebyshev filter timing sweeps over order and edge count.
    Bench(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kernel(c) => commands::kernel(&c),
        Command::Sample(c) => commands::sample(&c),
        Command::Train(c) => commands::train(&c),
        Command::EvalOod(c) => commands::eval_ood(&c),
        Command::Li(c) => commands::li(&c),
        Command::Rewire(c) => commands::rewire(&c),
        Command::Bench(c) => commands::bench(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
