//! Command-line experiment runner for stochlab.
//!
//! Each run subcommand reads a TOML config, writes one or more CSV files and
//! a `manifest.json` into `--out`. `compare` checks two or more CSV series
//! against each other.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod compare;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;

use compare::{CompareOptions, Series, TolerancePolicy};
use config::Config;
use error::CliError;
use experiments::Artifact;
use manifest::{Manifest, MANIFEST_NAME};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_COMPARISON_FAIL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "stochlab", version, about = "Cross-representation stochastic process laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Langevin ensemble (Euler-Maruyama or Heun)
    Sde(RunArgs),
    /// Fokker-Planck evolution from a point start
    Fpe(RunArgs),
    /// Exact master-equation evolution in Fock space
    Doi(RunArgs),
    /// Gillespie ensemble
    Ssa(RunArgs),
    /// Dyson series for the mean occupation
    Perturb(RunArgs),
    /// Mean-field and one-loop rate equations for A + A -> 0
    Rateloop(RunArgs),
    /// Compare two or more CSV series
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the config's `seed` (default 0)
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(required = true, num_args = 2.., value_name = "CSV")]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = TolerancePolicy::Mc3sigma)]
    pub tolerance_policy: TolerancePolicy,
    /// Absolute slack added under either policy
    #[arg(long, default_value_t = 1e-9)]
    pub abs_tol: f64,
    /// Relative tolerance for the analytic policy
    #[arg(long, default_value_t = 0.0)]
    pub rel_tol: f64,
    /// Column to compare (`mean_n` and `var_n` match `mean` and `var`)
    #[arg(long, default_value = "mean")]
    pub column: String,
    /// Resample onto the coarser grid instead of failing on a mismatch
    #[arg(long)]
    pub interpolate: bool,
    /// Also write `compare.csv` here
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Exit status and text for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub message: String,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })
}

/// Run one experiment subcommand on already-loaded config text.
pub fn run_experiment(subcommand: &str, config_text: &str, seed: Option<u64>) -> Result<(Manifest, Vec<Artifact>), CliError> {
    let cfg = Config::parse(config_text)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let artifacts = match subcommand {
        "sde" => experiments::run_sde(&cfg, seed)?,
        "fpe" => experiments::run_fpe(&cfg)?,
        "doi" => experiments::run_doi(&cfg)?,
        "ssa" => experiments::run_ssa(&cfg, seed)?,
        "perturb" => experiments::run_perturb(&cfg)?,
        "rateloop" => experiments::run_rateloop(&cfg)?,
        other => unreachable!("subcommand {other} is not an experiment"),
    };
    let manifest = Manifest::new(subcommand, seed, config_text, &cfg, &artifacts);
    Ok((manifest, artifacts))
}

fn run(subcommand: &str, args: &RunArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::ConfigRead {
        path: args.config.clone(),
        source,
    })?;
    let (manifest, artifacts) = run_experiment(subcommand, &text, args.seed)?;
    std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.clone(),
        source,
    })?;
    let mut message = String::new();
    for a in &artifacts {
        write_file(&args.out, &a.name, &a.bytes)?;
        message.push_str(&format!("wrote {}\n", args.out.join(&a.name).display()));
    }
    write_file(&args.out, MANIFEST_NAME, manifest.to_json().as_bytes())?;
    message.push_str(&format!("wrote {}\n", args.out.join(MANIFEST_NAME).display()));
    Ok(Outcome {
        code: EXIT_PASS,
        message,
    })
}

fn run_compare(args: &CompareArgs) -> Result<Outcome, CliError> {
    let series = args
        .files
        .iter()
        .map(|p| Series::read(p, &args.column))
        .collect::<Result<Vec<_>, _>>()?;
    let report = compare::compare(
        &series,
        CompareOptions {
            policy: args.tolerance_policy,
            abs_tol: args.abs_tol,
            rel_tol: args.rel_tol,
            interpolate: args.interpolate,
        },
    )?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        write_file(dir, "compare.csv", &report.to_csv())?;
    }
    Ok(Outcome {
        code: if report.pass { EXIT_PASS } else { EXIT_COMPARISON_FAIL },
        message: report.summary(),
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Sde(a) => run("sde", a),
        Command::Fpe(a) => run("fpe", a),
        Command::Doi(a) => run("doi", a),
        Command::Ssa(a) => run("ssa", a),
        Command::Perturb(a) => run("perturb", a),
        Command::Rateloop(a) => run("rateloop", a),
        Command::Compare(a) => run_compare(a),
    }
}
