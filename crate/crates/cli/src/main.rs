//! `scoregap` — command-line surface for streaming change-point detection.
//!
//! Subcommands:
//!
//! * `run` — run the detector over a CSV file or a built-in example stream,
//!   writing an NDJSON trace, a JSON report, and optional plot artifacts.
//! * `calibrate` — pick an alarm threshold from change-free streams.
//! * `evaluate` — score a run report against annotated change points.
//! * `generate` — write a built-in example stream as CSV.
//! * `selfcheck` — run the numerical verification suite.
//!
//! Exit codes: 0 success, 2 usage error, 3 I/O error, 4 numeric failure
//! (including a failed selfcheck). A run that raises no alarm is still a
//! success.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod ingest;
mod outputs;

/// Error carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flag combination or flag value (exit 2).
    Usage(String),
    /// Unreadable, unwritable, or malformed file (exit 3).
    Io(String),
    /// Numerical failure inside a computation (exit 4).
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

/// Column normalization applied to ingested data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Normalize {
    /// Use the data as is.
    None,
    /// Divide each column by its maximum absolute value over the whole
    /// stream (an all-zero column is left unchanged).
    MaxAbs,
}

impl Normalize {
    fn describe(self) -> &'static str {
        match self {
            Normalize::None => "none",
            Normalize::MaxAbs => "max-abs",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "scoregap",
    version,
    about = "Streaming score-based change-point detection",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over a CSV file or a built-in example stream
    Run(RunArgs),
    /// Calibrate an alarm threshold on change-free generated streams
    Calibrate(CalibrateArgs),
    /// Score a run report against annotated change points
    Evaluate(EvaluateArgs),
    /// Write a built-in example stream as CSV
    Generate(GenerateArgs),
    /// Run the numerical verification suite
    Selfcheck(SelfcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// CSV file of observations, one row per time step (exactly one of
    /// --input / --generate)
    #[arg(long, conflicts_with = "generate")]
    input: Option<PathBuf>,

    /// Built-in stream: example1, example2, example3, or example4
    #[arg(long)]
    generate: Option<String>,

    /// Score basis: poly1 (linear) or poly2 (quadratic)
    #[arg(long, default_value = "poly2")]
    basis: String,

    /// Prior precision λ of the parameter prior
    #[arg(long)]
    lambda: f64,

    /// Restart probability α of the switching forecaster
    #[arg(long)]
    alpha: f64,

    /// Learning rate: a positive number, or "inv-sqrt" for η_t = 1/√t
    #[arg(long)]
    eta: String,

    /// Fixed alarm threshold (exactly one of --threshold / --calibrate)
    #[arg(long, conflicts_with = "calibrate")]
    threshold: Option<f64>,

    /// Calibrate the threshold first: "J,T0" = number of change-free runs,
    /// rounds per run (needs --generate)
    #[arg(long)]
    calibrate: Option<String>,

    /// Grace window: alarms fewer than this many rounds before a change are
    /// neither false alarms nor detections
    #[arg(long, default_value_t = 10)]
    min_diff: usize,

    /// Seed for stream generation and calibration draws
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Column normalization applied to the input stream
    #[arg(long, value_enum, default_value_t = Normalize::None)]
    normalize: Normalize,

    /// Write the per-round trace as NDJSON (one JSON object per line)
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Write the run report as JSON (default: print to stdout)
    #[arg(long)]
    report: Option<PathBuf>,

    /// Write plot data as CSV (t, statistic, threshold)
    #[arg(long)]
    plot: Option<PathBuf>,

    /// Write a line chart of the statistic as SVG
    #[arg(long)]
    svg: Option<PathBuf>,

    /// Include regret diagnostics in the report (computed over the
    /// processed prefix of the stream)
    #[arg(long)]
    diagnostics: bool,

    /// Keep processing after the first alarm instead of stopping
    #[arg(long)]
    continue_after_alarm: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Built-in stream whose change-free segment supplies the null draws:
    /// example1..example4
    #[arg(long)]
    generate: String,

    /// "J,T0" = number of change-free runs, rounds per run
    #[arg(long)]
    calibrate: String,

    /// Score basis: poly1 or poly2
    #[arg(long, default_value = "poly2")]
    basis: String,

    /// Prior precision λ of the parameter prior
    #[arg(long)]
    lambda: f64,

    /// Restart probability α of the switching forecaster
    #[arg(long)]
    alpha: f64,

    /// Learning rate: a positive number, or "inv-sqrt"
    #[arg(long)]
    eta: String,

    /// Seed for the change-free draws
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the calibration result as JSON (default: print to stdout)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run report JSON produced by `scoregap run`
    #[arg(long)]
    input: PathBuf,

    /// Annotated change points: a JSON array (e.g. "[150]") or one integer
    /// per line
    #[arg(long)]
    annotations: PathBuf,

    /// Grace window: alarms fewer than this many rounds before a change are
    /// neither false alarms nor detections
    #[arg(long, default_value_t = 10)]
    min_diff: usize,

    /// Write the metrics as JSON (default: print to stdout)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in stream: example1, example2, example3, or example4
    #[arg(long)]
    generate: String,

    /// Seed for the draw
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write the stream as CSV (default: print to stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Seed for the verification instances
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::cmd_run(args),
        Command::Calibrate(args) => commands::cmd_calibrate(args),
        Command::Evaluate(args) => commands::cmd_evaluate(args),
        Command::Generate(args) => commands::cmd_generate(args),
        Command::Selfcheck(args) => commands::cmd_selfcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
