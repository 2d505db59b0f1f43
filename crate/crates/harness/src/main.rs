use clap::{Args, Parser, Subcommand};
use flowlab::{load_config, run_experiment, HarnessError, Kind, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "flowlab", version, about = "Run flowlab experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mollified coefficients against the originals on a probe grid.
    Mollify(Common),
    /// Particle trajectories, optionally with tangent log-determinants.
    Flow(Common),
    /// Pushforward densities, the L^p bound and transport certificates.
    Density(Common),
    /// Cauchy study over mollification levels and the Lipschitz audit.
    Stability(Common),
    /// Finite-volume Fokker-Planck solve with Monte Carlo cross-check.
    Fpe(Common),
    /// Rate minimisation, small-noise ladders, Laplace and weak checks.
    Ldp(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Mollify(a) => (Kind::Mollify, a),
        Command::Flow(a) => (Kind::Flow, a),
        Command::Density(a) => (Kind::Density, a),
        Command::Stability(a) => (Kind::Stability, a),
        Command::Fpe(a) => (Kind::Fpe, a),
        Command::Ldp(a) => (Kind::Ldp, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.payload());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(kind: Kind, args: Common) -> Result<(), HarnessError> {
    if args.threads == Some(0) {
        return Err(HarnessError::config("--threads", "must be positive"));
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::config("--threads", e.to_string()))?;
    }
    let config = load_config(&args.config)?;
    let manifest = run_experiment(
        &config,
        &RunOptions {
            kind: Some(kind),
            seed: args.seed,
            out: args.out,
            threads: args.threads,
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    Ok(())
}
