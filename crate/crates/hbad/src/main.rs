use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hbad::output::{verify_branch, BranchRecord};
use hbad::{CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "hbad", version, about = "Harmonic balance with automatic-differentiation Jacobians")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent jobs (overrides `jobs` in the config).
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for random initial guesses (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve at a single frequency.
    Solve(RunArgs),
    /// Natural-parameter sweep with warm starts.
    Sweep(RunArgs),
    /// Pseudo-arclength continuation.
    Trace(RunArgs),
    /// Time integration from rest.
    Timesim(RunArgs),
    /// Harmonic balance against time integration.
    Compare(RunArgs),
    /// Re-evaluate the residual at every point of a saved `branch.json`.
    Verify {
        #[arg(long)]
        branch: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Trace(a) => (Command::Trace, a),
        Cmd::Timesim(a) => (Command::Timesim, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Verify { branch } => {
            let v = verify_branch(&BranchRecord::load(&branch)?)?;
            println!("{} points, max |B| = {:e}, tol {:e}: {}", v.norms.len(), v.max_norm, v.tol, if v.passed { "ok" } else { "FAILED" });
            return Ok(v.passed);
        }
    };
    let mut config = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let out = args
        .out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;
    let jobs = args.jobs.or(config.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let outcomes = hbad::run(command, &config, &out, jobs)?;
    for o in &outcomes {
        println!("[{}] {}", o.dir.display(), o.summary);
    }
    Ok(outcomes.iter().all(|o| o.converged))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
