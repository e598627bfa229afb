//! Command-line driver: Monte Carlo campaigns, hypothesis-count tables and
//! the built-in invariant suite.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tpmb::assignment::{count_mbm01_hypotheses, count_mbm_hypotheses};
use tpmb::harness::{emit_results, run_campaign, CampaignConfig, OutputFormat};
use tpmb::selftest;

#[derive(Parser)]
#[command(name = "tpmb", about = "Trajectory Poisson multi-Bernoulli filters", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign from a TOML config file.
    Run(RunArgs),
    /// Print the closed-form number of global hypotheses after a first
    /// update with multi-Bernoulli versus Poisson birth.
    Count(CountArgs),
    /// Run the built-in invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Campaign configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output path for the aggregate results; a `_series` companion file is
    /// written next to it.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's number of Monte Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CountArgs {
    /// Number of measurements in the first update.
    #[arg(long, short = 'm', default_value_t = 14)]
    measurements: u64,
    /// Bernoulli counts to tabulate.
    #[arg(long, short = 'n', value_delimiter = ',', default_values_t = vec![4u64, 5, 6, 7])]
    bernoullis: Vec<u64>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run_command(args),
        Command::Count(args) => count_command(args),
        Command::Selftest(args) => selftest_command(args),
    }
}

fn run_command(args: RunArgs) -> ExitCode {
    let format: OutputFormat = match args.format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut cfg = match CampaignConfig::from_toml_file(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let run = || match run_campaign(&cfg) {
        Ok(table) => {
            if let Err(e) = emit_results(&table, format, &args.out) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            println!(
                "{:<14} {:<7} {:<13} {:>11} {:>4} {:>8} {:>8} {:>8} {:>8} {:>10}",
                "filter", "variant", "sweep_key", "sweep_value", "L", "d_T", "loc", "missed",
                "false", "runtime_s"
            );
            for r in &table.records {
                println!(
                    "{:<14} {:<7} {:<13} {:>11} {:>4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>10.3}",
                    r.filter,
                    r.variant,
                    r.sweep_key,
                    r.sweep_value.map_or_else(|| "-".to_string(), |v| format!("{v}")),
                    r.lscan,
                    r.d_total,
                    r.localization,
                    r.missed,
                    r.false_,
                    r.runtime_s
                );
            }
            println!("wrote {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    };

    match args.jobs {
        None => run(),
        Some(jobs) => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
                Ok(pool) => pool,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(run)
        }
    }
}

fn count_command(args: CountArgs) -> ExitCode {
    println!("m={}", args.measurements);
    println!("n,mbm,mbm01,pmbm");
    for n in &args.bernoullis {
        let mbm = match count_mbm_hypotheses(args.measurements, *n) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        let mbm01 = match count_mbm01_hypotheses(args.measurements, *n) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        };
        println!("{n},{mbm},{mbm01},1");
    }
    ExitCode::SUCCESS
}

fn selftest_command(args: SelftestArgs) -> ExitCode {
    let results = selftest::run_all(args.seed);
    let mut all_passed = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} {:<24} {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
