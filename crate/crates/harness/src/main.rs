use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaconv_core::bounds::{BoundInputs, Theorem};
use adaconv_harness::output::{read_csv, write_json, write_results};
use adaconv_harness::verify::{verify_bounds, verify_lemmas, BoundsGridConfig, SuiteSizes, DEFAULT_VERIFY_SEED};
use adaconv_harness::{loglog_regress, sweep, HarnessError, SeedSource, SweepConfig};
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

const SEED_ENV: &str = "ADACONV_SEED";

#[derive(Parser)]
#[command(name = "adaconv", version, about = "Adaptive optimizer sweeps, bounds and lemma verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep over one hyperparameter and write CSV and JSON results.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the master seed of the config.
        #[arg(long, env = SEED_ENV)]
        seed: Option<u64>,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit a line in log-log scale to an `x,y,yerr` CSV file.
    Regress {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check lemmas and theorem bounds numerically.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Evaluate convergence bounds.
    Bounds {
        #[command(subcommand)]
        what: BoundsCommand,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Randomized and exact-enumeration lemma suite.
    Lemmas {
        #[arg(long, default_value_t = DEFAULT_VERIFY_SEED)]
        seed: u64,
        /// Also write the JSON report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare exact expectations with theorem bounds over a grid.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Read bound inputs as JSON and print every bound's breakdown.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("results serialize"));
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), HarnessError> {
    print_json(value);
    match out {
        Some(path) => write_json(value, path),
        None => Ok(()),
    }
}

fn seed_source(matches: &ArgMatches) -> Option<SeedSource> {
    let (_, sub) = matches.subcommand()?;
    match sub.value_source("seed")? {
        ValueSource::EnvVariable => Some(SeedSource::Environment),
        ValueSource::CommandLine => Some(SeedSource::CommandLine),
        _ => None,
    }
}

fn run_sweep(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    source: Option<SeedSource>,
    jobs: Option<usize>,
) -> Result<(), HarnessError> {
    let mut cfg = SweepConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    let mut table = sweep(&cfg, jobs)?;
    table.seed_source = source.unwrap_or_default();
    let stem = cfg.vary.name();
    let (csv, json) = write_results(&table, out, stem)?;
    for row in table.failures() {
        eprintln!("{} = {:e}: {}", stem, row.value, row.error.as_deref().unwrap_or_default());
    }
    println!("{}", csv.display());
    println!("{}", json.display());
    Ok(())
}

fn run_regress(input: &Path) -> Result<(), HarnessError> {
    let points: Vec<(f64, f64)> = read_csv(input)?.into_iter().map(|(x, y, _)| (x, y)).collect();
    print_json(&loglog_regress(&points)?);
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum Evaluation {
    Value(adaconv_core::bounds::BoundValue),
    Error { error: String },
}

fn run_bounds_eval(input: &Path) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(input)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", input.display())))?;
    let inputs: BoundInputs =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", input.display())))?;
    let out: BTreeMap<&str, Evaluation> = Theorem::ALL
        .iter()
        .map(|t| {
            let v = match t.evaluate(&inputs) {
                Ok(v) => Evaluation::Value(v),
                Err(e) => Evaluation::Error { error: e.to_string() },
            };
            (t.name(), v)
        })
        .collect();
    print_json(&out);
    Ok(())
}

fn run(cli: Cli, matches: &ArgMatches) -> Result<(), HarnessError> {
    match cli.command {
        Command::Sweep { config, out, seed, jobs } => run_sweep(&config, &out, seed, seed_source(matches), jobs),
        Command::Regress { input } => run_regress(&input),
        Command::Verify { what: VerifyCommand::Lemmas { seed, out } } => {
            let report = verify_lemmas(seed, SuiteSizes::default())?;
            emit(&report, out.as_deref())?;
            if report.all_hold {
                Ok(())
            } else {
                let failed: Vec<&str> =
                    report.checks.iter().filter(|t| !t.passed()).map(|t| t.check.as_str()).collect();
                Err(HarnessError::Verification(failed.join(", ")))
            }
        }
        Command::Verify { what: VerifyCommand::Bounds { config, out } } => {
            let report = verify_bounds(&BoundsGridConfig::load(&config)?)?;
            emit(&report, out.as_deref())?;
            if report.tally.violations == 0 {
                Ok(())
            } else {
                Err(HarnessError::Verification(format!("{} bound violations", report.tally.violations)))
            }
        }
        Command::Bounds { what: BoundsCommand::Eval { input } } => run_bounds_eval(&input),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli, &matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adaconv: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
