use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsqg_cli::config;
use gsqg_cli::error::{CliError, Result};
use gsqg_cli::{plot, run, suite};

/// Vortex-wave solver for the generalized SQG equation.
#[derive(Debug, Parser)]
#[command(name = "gsqg", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "GSQG_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "GSQG_OUT", default_value = "out")]
    out: PathBuf,
    /// Seed for random initial-data generators.
    #[arg(long, global = true, env = "GSQG_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "GSQG_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Coupled scalar/vortex run: diagnostics, snapshots, manifest.
    Simulate,
    /// Point vortices alone: trajectory CSV.
    VortexOnly,
    /// Parameter ladder with fitted log-log slope: rates CSV.
    Convergence,
    /// Acceptance suite, one line per criterion.
    Check {
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// PNG heatmaps and time-series panels for a run directory.
    Plot {
        /// Run directory; defaults to --out.
        dir: Option<PathBuf>,
    },
}

fn load(cli: &Cli) -> Result<config::Setup> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config (or GSQG_CONFIG) is required".into()))?;
    config::load(path, cli.seed)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate => {
            let m = run::run_simulate(&load(cli)?, &cli.out)?;
            println!("{}: {} steps to t = {}", m.termination.reason, m.steps, m.final_time);
        }
        Command::VortexOnly => {
            let m = run::run_vortex_only(&load(cli)?, &cli.out)?;
            println!("{} samples to t = {}", m.steps + 1, m.final_time);
        }
        Command::Convergence => {
            run::run_convergence(&load(cli)?, &cli.out)?;
            let rates = cli.out.join(run::RATES_CSV);
            print!("{}", std::fs::read_to_string(&rates).map_err(|e| CliError::io(&rates, e))?);
        }
        Command::Check { only } => {
            let results = suite::run_suite(only, |r| println!("{r}"));
            suite::summarize(&results)?;
        }
        Command::Plot { dir } => {
            for p in plot::emit_plots(dir.as_ref().unwrap_or(&cli.out))? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    if let Err(e) = pool {
        eprintln!("gsqg: thread pool: {e}");
        return ExitCode::from(2);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gsqg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
