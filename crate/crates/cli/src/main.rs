//! `icnn-opf`: generate OPF datasets, train convex surrogates, evaluate and certify them.
//!
//! Exit codes: 0 success, 2 input error, 3 empty result, 4 numerical failure, 64 usage.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "icnn-opf", version, about = "Convex neural surrogates of optimal power flow value functions")]
struct Cli {
    /// Worker threads; `--threads 1` gives bitwise-reproducible runs.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Case file utilities.
    #[command(subcommand)]
    Case(CaseCommand),
    /// Build labeled datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train an ICNN or an unconstrained baseline network.
    Train(TrainArgs),
    /// Report optimality gaps of one model, optionally against a baseline.
    Eval(EvalArgs),
    /// Compute a generalization certificate.
    Certify(CertifyArgs),
    /// Write a DC, SOC or AC formulation for an external solver.
    ExportFormulation(ExportArgs),
}

#[derive(Debug, Subcommand)]
enum CaseCommand {
    /// Print network statistics and validation findings.
    Inspect { case: PathBuf },
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Sample load profiles around the reference demand and solve the DC-OPF for each.
    Generate(GenerateArgs),
    /// Validate an externally labeled dataset and assign splits if missing.
    Import(ImportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0.8)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 1.065)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta_std: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Seed for the train/valid/test split when the file has none.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Icnn,
    Dnn,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Arch::Icnn)]
    pub arch: Arch,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    pub widths: Vec<usize>,
    /// Training configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed for both initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for icnn_opf::datagen::Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Self::Train,
            SplitArg::Valid => Self::Valid,
            SplitArg::Test => Self::Test,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub theorem: u8,
    /// Random hull points for the sampled envelope bound.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Exact envelope bound for one-dimensional inputs.
    #[arg(long)]
    pub exact_1d: bool,
    /// Perfect-fit tolerance for the closed-form bound.
    #[arg(long, default_value_t = 1e-6)]
    pub fit_tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Split whose points span the certified domain.
    #[arg(long, value_enum, default_value_t = SplitArg::Train)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Dc,
    Soc,
    Ac,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// JSON file `{"pd": [...], "qd": [...]}` in per-unit; defaults to the case's reference demand.
    #[arg(long)]
    pub loads: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let threads = cli.threads;
    match cli.command {
        Command::Case(CaseCommand::Inspect { case }) => commands::inspect(&case),
        Command::Dataset(DatasetCommand::Generate(a)) => commands::generate(&a, threads),
        Command::Dataset(DatasetCommand::Import(a)) => commands::import(&a, threads),
        Command::Train(a) => commands::train(&a, threads),
        Command::Eval(a) => commands::eval(&a, threads),
        Command::Certify(a) => commands::certify(&a, threads),
        Command::ExportFormulation(a) => commands::export(&a, threads),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
