//! Command-line driver: `check`, `verify`, `scan`, `reproduce` and
//! `list-presets` over a TOML configuration.
//!
//! Exit codes: 0 success, 1 mathematical failure (violated condition, fail
//! verdict, vacuous scan), 2 usage or config error, 3 numerically
//! indeterminate.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;

use commands::{CommandError, Exit};
use config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "hardylab",
    version,
    about = "Numerical laboratory for variable-exponent Caccioppoli and Hardy inequalities"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for test-function families and scan restarts.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true, value_name = "X")]
    pub tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check admissibility of the configured instance.
    Check,
    /// Verify both inequalities on a seeded batch of test functions.
    Verify,
    /// Search for the smallest RHS/LHS ratio of the Hardy inequality.
    Scan,
    /// Run check, verify (and scan where applicable) on a named scenario.
    Reproduce { name: String },
    /// List presets and reproduce scenarios.
    ListPresets,
}

fn effective_config(cli: &Cli) -> Result<Config, CommandError> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.verification.seed = seed;
        cfg.scan.seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.quadrature.tol = tol;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<Exit, CommandError> {
    if let Command::ListPresets = cli.command {
        return Ok(commands::cmd_list_presets());
    }
    let cfg = effective_config(cli)?;
    let out = cfg.output.dir.clone();
    match &cli.command {
        Command::Check => commands::cmd_check(&cfg, &out),
        Command::Verify => commands::cmd_verify(&cfg, &out),
        Command::Scan => commands::cmd_scan(&cfg, &out),
        Command::Reproduce { name } => commands::cmd_reproduce(cfg, name, &out),
        Command::ListPresets => unreachable!(),
    }
}

/// Parse `args` and run one command, returning the process exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0
            || rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .is_err()
        {
            eprintln!("error: cannot start {n} worker threads");
            return Exit::Usage.code();
        }
    }
    match dispatch(&cli) {
        Ok(exit) => exit.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit().code()
        }
    }
}
