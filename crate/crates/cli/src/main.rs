//! `zeno`: stroboscopic reset maps for a level coupled to a quadratic bath.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use zeno_core::selftest::Fault;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "zeno",
    version,
    about = "Zeno and anti-Zeno rates under periodic bath resets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, replaces output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for parallel sweeps.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// Step durations, comma separated; replace the tau grid and run.tau.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tau: Vec<f64>,

    /// Level energies, comma separated; replace the omega0 grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    omega0: Vec<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Effective decay rate of the repeated-interaction map over a tau grid.
    RiRate(Common),
    /// Stroboscopic population history for the configured protocol.
    RiEvolve(Common),
    /// Continuous-reset trajectory and stroboscopic rate comparison.
    EcRun(Common),
    /// Decay rate over an (omega0, tau) grid with ridge detection.
    DesignMap(Common),
    /// Built-in consistency checks.
    Selftest {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        tau: common.tau.clone(),
        omega0: common.omega0.clone(),
        out: common.out.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

fn with_workers<F>(common: &Common, f: F) -> Result<(), CliError>
where
    F: FnOnce(&RunConfig) -> Result<(), CliError> + Send,
{
    let cfg = load(common)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Config("--workers: must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    pool.install(|| f(&cfg))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::RiRate(c) => with_workers(&c, commands::ri_rate),
        Command::RiEvolve(c) => with_workers(&c, commands::ri_evolve),
        Command::EcRun(c) => with_workers(&c, commands::ec_run),
        Command::DesignMap(c) => with_workers(&c, commands::design_map),
        Command::Selftest { inject_fault } => commands::selftest(if inject_fault {
            Fault::FlipResetConstant
        } else {
            Fault::None
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
