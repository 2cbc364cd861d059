use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polykin::harness::Suite;
use polykin_cli::commands;
use polykin_cli::CliError;

#[derive(Parser)]
#[command(name = "polykin", version, about = "Inertial polymer kinetics: engines, solvers and verification suites")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine and write moments.csv, snapshots and run.json.
    Simulate(RunArgs),
    /// Run an epsilon sweep and write report.json and distances.csv.
    Sweep(RunArgs),
    /// Solve directly for the inertia-free steady state.
    Steady(RunArgs),
    /// Run a verification suite: geometry, collision, equilibrium or limits.
    Verify {
        suite: String,
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let outputs = match cli.command {
        Command::Verify { suite, quick, out } => {
            let suite: Suite = suite.parse()?;
            commands::verify(suite, quick, out.as_deref())?;
            return Ok(());
        }
        Command::Simulate(a) => {
            commands::simulate(&commands::load(&a.config, a.seed, a.out.as_deref())?)?
        }
        Command::Sweep(a) => commands::sweep(&commands::load(&a.config, a.seed, a.out.as_deref())?)?,
        Command::Steady(a) => commands::steady(&commands::load(&a.config, a.seed, a.out.as_deref())?)?,
    };
    for p in outputs {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
