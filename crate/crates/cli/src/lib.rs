//! Command-line harness over `mms-core`: instance generation, sampling,
//! solving, quality assessment and robust-versus-nominal comparison.

mod commands;
mod record;
mod solution;

pub use commands::{
    cmd_assess, cmd_compare, cmd_evaluate, cmd_generate, cmd_saa, cmd_sample, cmd_solve, CompareRow,
    DETERMINISTIC_ITERATIONS,
};
pub use record::RunRecord;
pub use solution::{SolutionFile, SOLUTION_FORMAT};

use clap::{Args, Parser, Subcommand};
use mms_core::MmsError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] MmsError),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for size guards, 1 for internal failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(MmsError::Guard(_)) => 3,
            CliError::Core(MmsError::Contract(_) | MmsError::Lp(_)) => 1,
            _ => 2,
        }
    }
}

/// Exit code for a run that stopped at its time limit with an incumbent.
pub const EXIT_TIME_LIMIT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "mms", version, about = "Mixed-model sequencing under stochastic product failures")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate instance files for an instance class.
    Generate(GenerateArgs),
    /// Draw a failure sample and write it in text form.
    Sample(SampleCmdArgs),
    /// Solve the sample problem with one method.
    Solve(SolveArgs),
    /// Evaluate a solution on a sample.
    Evaluate(EvaluateArgs),
    /// Bound the optimality gap of a solution by replications.
    Assess(AssessArgs),
    /// Grow the sample until the gap bound of its solution is small enough.
    Saa(SaaArgs),
    /// Compare one-scenario and sample solutions out of sample.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "small")]
    pub class: String,
    /// Instances per size.
    #[arg(long, default_value_t = 30)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Vehicle counts; defaults to the sizes of the class.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    /// Overrides the share of high-risk vehicles, as `LO,HI`.
    #[arg(long, value_delimiter = ',')]
    pub high_risk_fraction: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct SampleArgs {
    #[arg(long, default_value_t = 100)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
    /// Only high-risk vehicles may fail.
    #[arg(long)]
    pub forbid_low_risk: bool,
    /// Read the sample from a file instead of drawing it.
    #[arg(long)]
    pub sample: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Iterations for the local searches.
    #[arg(long)]
    pub iters: Option<u64>,
    /// Replace wall-clock budgets by iteration budgets and zero reported times.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct SampleCmdArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "ts")]
    pub method: String,
    #[command(flatten)]
    pub sample: SampleArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Solution file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append the run record to this CSV file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Objective-versus-iteration series of the local searches.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Solver log (greedy trace or bound progression).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[command(flatten)]
    pub sample: SampleArgs,
    /// Per-position trace of the failure-free scenario.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long, default_value = "enum")]
    pub method: String,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    /// Scenarios per replication.
    #[arg(long, default_value_t = 200)]
    pub sample_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub forbid_low_risk: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SaaArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, default_value = "enum")]
    pub method: String,
    /// Increasing sample sizes of the candidate problems.
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000")]
    pub sizes: Vec<usize>,
    /// Target for the normalized gap bound.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
    /// Scenarios per replication.
    #[arg(long, default_value_t = 200)]
    pub mrp_size: usize,
    #[arg(long)]
    pub forbid_low_risk: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Trace CSV, one row per sample size.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solution file of the returned candidate.
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub instance: Vec<PathBuf>,
    #[arg(long, default_value = "ts")]
    pub method: String,
    #[arg(long, default_value_t = 100)]
    pub sample_size: usize,
    /// Scenarios of the common out-of-sample set.
    #[arg(long, default_value_t = 1000)]
    pub eval_size: usize,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub forbid_low_risk: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one command and returns the process exit code on success.
pub fn run(cli: Cli) -> Result<u8, CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.command {
        Command::Generate(a) => {
            for path in cmd_generate(&a)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Sample(a) => {
            let text = cmd_sample(&a)?;
            emit(a.out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Solve(a) => {
            let (record, timed_out) = cmd_solve(&a)?;
            print!("{}", record.to_csv()?);
            Ok(if timed_out { EXIT_TIME_LIMIT } else { 0 })
        }
        Command::Evaluate(a) => {
            println!("{:.6}", cmd_evaluate(&a)?);
            Ok(0)
        }
        Command::Assess(a) => {
            let report = cmd_assess(&a)?;
            emit(a.out.as_deref(), &report.to_csv())?;
            Ok(if report.aborted.is_some() { 1 } else { 0 })
        }
        Command::Saa(a) => {
            let text = cmd_saa(&a)?;
            emit(a.out.as_deref(), &text)?;
            Ok(0)
        }
        Command::Compare(a) => {
            let rows = cmd_compare(&a)?;
            emit(a.out.as_deref(), &CompareRow::to_csv(&rows)?)?;
            Ok(0)
        }
    }
}

fn emit(path: Option<&std::path::Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
