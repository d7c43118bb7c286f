//! Command-line front end: `fit` runs calibrated inference on a delimited
//! dataset, `simulate` reproduces the Monte Carlo studies, `tune`
//! cross-validates the calibration exponent, and `power` sweeps effect sizes
//! into rejection-rate curves.

mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use maxeffect::error::Error;

#[derive(Parser)]
#[command(
    name = "maxeffect",
    version,
    about = "Bias-reduced estimates and sharp one-sided bounds for the best subgroup treatment effect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Flat key=value config file with [fit]/[simulate]/[tune]/[power] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results are identical for any value).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory for reports and tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimation route: debiased | rsplit.
    #[arg(long)]
    method: Option<String>,
    /// Calibration exponent: auto or a value in (0, 0.5).
    #[arg(long)]
    r: Option<String>,
    /// Bootstrap replicates for the debiased route.
    #[arg(long = "B")]
    b: Option<usize>,
    /// Number of data splits for the splitting route.
    #[arg(long = "B1")]
    b1: Option<usize>,
    /// Bootstrap replicates for the splitting route.
    #[arg(long = "B2")]
    b2: Option<usize>,
    /// Comma-separated confidence levels (default 0.95).
    #[arg(long)]
    confidence: Option<String>,
    /// Multiplier law: rademacher | gaussian | mammen.
    #[arg(long)]
    multiplier: Option<String>,
    /// Penalty rule for the debiased fit: 1se | min | 1.1x1se | lambda0 | <value>.
    #[arg(long)]
    lambda: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Delimited input file (comma or tab, header row required).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column roles: `response=y;subgroups=z1,z2;covariates=rest`.
    #[arg(long)]
    schema: Option<String>,
    /// Also report the unadjusted and simultaneous baselines.
    #[arg(long)]
    baselines: bool,
    /// Overlapping-subgroup mode: comma-separated membership columns.
    #[arg(long)]
    membership: Option<String>,
    /// Treatment indicator column for the overlap interaction coding.
    #[arg(long)]
    treatment: Option<String>,
    /// External conditional-proportion table (rows = subgroups, columns = atoms).
    #[arg(long)]
    overlap_a: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scenario preset, e.g. `table1-binary-spurious-p2`, `example1`.
    #[arg(long)]
    preset: Option<String>,
    /// Monte Carlo repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma list of methods to compare.
    #[arg(long)]
    methods: Option<String>,
    /// Override scenario sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Override subgroup count.
    #[arg(long)]
    p1: Option<usize>,
    /// Override covariate count.
    #[arg(long)]
    p2: Option<usize>,
    /// Also write one generated dataset as CSV.
    #[arg(long)]
    emit_data: bool,
}

#[derive(Args, Debug, Clone)]
struct TuneArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    schema: Option<String>,
    /// Generate data from a preset instead of reading a file.
    #[arg(long)]
    preset: Option<String>,
    /// Comma list of candidate exponents (ascending, inside (0, 0.5)).
    #[arg(long)]
    candidates: Option<String>,
    /// Fold count.
    #[arg(long)]
    v: Option<usize>,
    /// Inner bootstrap budget.
    #[arg(long)]
    b_inner: Option<usize>,
    /// Override preset sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Override preset covariate count.
    #[arg(long)]
    p2: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct PowerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma list of effect sizes to sweep.
    #[arg(long)]
    effects: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    p1: Option<usize>,
    /// Comma list of methods (default: both calibrated pipelines).
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrated inference on a real dataset.
    Fit(FitArgs),
    /// Monte Carlo study of coverage and bias.
    Simulate(SimulateArgs),
    /// Cross-validate the calibration exponent.
    Tune(TuneArgs),
    /// Rejection-rate curves over effect sizes.
    Power(PowerArgs),
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(0);
            }
            let _ = e.print();
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Fit(args) => commands::fit::run(args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Tune(args) => commands::tune::run(args),
        Command::Power(args) => commands::power::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
