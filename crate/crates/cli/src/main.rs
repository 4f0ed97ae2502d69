use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod failure;

use commands::Options;

#[derive(Parser)]
#[command(name = "disperse", version, about = "Packet-pair dispersion laws, simulation and rate estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact output separation law (one leaf) or leaf joint table.
    Dist(Args),
    /// Simulate probe pairs and write their separations.
    Simulate(Args),
    /// Estimate per-queue rates by grid search or adaptive descent.
    Estimate(Args),
    /// Export a dense cost surface.
    Surface(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Also check the exact law against a simulation of the same config.
    #[arg(long)]
    verify: bool,
    /// Worker threads for grid evaluation.
    #[arg(long, env = "DISPERSE_WORKERS")]
    workers: Option<usize>,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (args, cmd): (&Args, fn(&config::Loaded, &Options) -> failure::Outcome<()>) = match &cli.command {
        Command::Dist(a) => (a, commands::dist),
        Command::Simulate(a) => (a, commands::simulate_cmd),
        Command::Estimate(a) => (a, commands::estimate),
        Command::Surface(a) => (a, commands::surface),
    };
    let opts = Options { verify: args.verify, workers: args.workers, out: args.out.clone() };
    let result = config::load(&args.config).and_then(|loaded| cmd(&loaded, &opts));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
