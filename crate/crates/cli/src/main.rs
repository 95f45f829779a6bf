use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Parser, ValueEnum};

mod commands;
mod config;
mod output;

use commands::{Context, Verdict};
use config::ProblemConfig;
use output::OutputDir;

/// Half-eigenvalues, minimizing measures and resonant Dirichlet problems for
/// Bellman operators.
#[derive(Debug, Parser)]
#[command(name = "halfeig", version)]
struct Cli {
    command: Command,
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result.json and CSV tables.
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
    /// Seed for randomized trials.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the normalized configuration and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Eigen,
    Solve,
    Resonance,
    Tstar,
    Measures,
    Check,
    Sweep,
}

fn run(cli: &Cli) -> Result<Verdict> {
    let config = ProblemConfig::load(&cli.config)?;
    if cli.print_config {
        println!("{}", config.to_json());
        return Ok(Verdict::Success);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let problem = config.problem()?;
    let out = OutputDir::create(cli.out.as_deref().expect("clap enforces --out"))?;
    let ctx = Context {
        config: &config,
        problem: &problem,
        out: &out,
        seed: cli.seed,
    };
    match cli.command {
        Command::Eigen => commands::eigen(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Resonance => commands::resonance(&ctx),
        Command::Tstar => commands::tstar(&ctx),
        Command::Measures => commands::measures(&ctx),
        Command::Check => commands::check(&ctx),
        Command::Sweep => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Verdict::Success) => ExitCode::SUCCESS,
        Ok(Verdict::Unsolvable) => ExitCode::from(2),
        Ok(Verdict::Failure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
