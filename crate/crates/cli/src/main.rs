//! `adoptfit`: batch pipeline from weekly search-frequency CSVs to fitted
//! diffusion models, goodness-of-fit tables, parameter embeddings and
//! forecasts.

mod commands;
mod config;
mod corpus;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use adoptfit_core::Family;

#[derive(Parser, Debug)]
#[command(name = "adoptfit", version, about)]
struct Cli {
    /// Worker threads for batch fitting (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect onsets, fit diffusion models and write per-fit results.
    Fit(FitArgs),
    /// Detect attention onsets only.
    Onset(OnsetArgs),
    /// Goodness-of-fit tables, adoption delays and parameter embedding.
    Report(ReportArgs),
    /// Extrapolate fitted curves and reconstruct the unobserved past.
    Forecast(ForecastArgs),
    /// Write the bundled synthetic smoke corpus.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    Bass,
    Sg,
    Weibull,
    All,
}

impl FamilyChoice {
    pub fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Bass => vec![Family::Bass],
            FamilyChoice::Sg => vec![Family::ShiftedGompertz],
            FamilyChoice::Weibull => vec![Family::Weibull],
            FamilyChoice::All => Family::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug)]
pub struct ConfigArg {
    /// TOML file with `[fit]` and `[onset]` tables.
    #[arg(long, env = "ADOPTFIT_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Long-format CSV with columns date,service,region,value.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub family: FamilyChoice,
    #[command(flatten)]
    pub config: ConfigArg,
    /// CSV with columns service,launch_date for services launched before the
    /// observation window.
    #[arg(long)]
    pub launch_dates: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OnsetArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub config: ConfigArg,
    /// CUSUM allowance, overriding the config.
    #[arg(long)]
    pub drift: Option<f64>,
    /// CUSUM decision level, overriding the config.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub baseline_window: Option<usize>,
    /// Interpret drift and threshold in series units instead of baseline
    /// standard deviations.
    #[arg(long)]
    pub absolute: bool,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    Region,
    Language,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of a `fit` run.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum, default_value = "region")]
    pub group_by: GroupBy,
    /// CSV with columns region,group; required for `--group-by language`.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Include unconverged fits in the embedding.
    #[arg(long)]
    pub include_unconverged: bool,
    /// Defaults to `<results>/report`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Re-prepare series from this CSV instead of the stored series files.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 260)]
    pub horizon_weeks: u32,
    /// Only forecast the best-fitting family of each series.
    #[arg(long)]
    pub best_only: bool,
    /// Also forecast from fits that did not converge.
    #[arg(long)]
    pub force: bool,
    /// Defaults to `<results>/forecasts`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = corpus::DEFAULT_SEED)]
    pub seed: u64,
    /// Directory for corpus.csv, launches.csv and languages.csv.
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command achieved, mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some fits did not converge or could not be computed.
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fit(args) => commands::fit::run(&args),
        Command::Onset(args) => commands::onset::run(&args),
        Command::Report(args) => commands::report::run(&args),
        Command::Forecast(args) => commands::forecast::run(&args),
        Command::Synth(args) => commands::synth::run(&args),
    };
    match result {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
