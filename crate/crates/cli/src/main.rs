//! Single entry-point binary for the pipeline: alignment scoring
//! (`encode`), two-turn evaluation (`evaluate`), statistical linkage
//! (`analyze`), report rendering (`report`), one-off response
//! classification (`parse`), prompt-set generation (`gen-prompts`), and the
//! full fixture-based reproduction checklist (`reproduce-paper`).
//!
//! Conventions shared by every subcommand:
//! - exit 0 on success, nonzero on any error; `--help` everywhere;
//! - configuration precedence: command-line flags, then `NEUROPROBE_*`
//!   environment variables, then the optional `--config` JSON file;
//! - every output directory receives a `manifest.json` recording the
//!   command line, resolved-config hash, seeds, and input digests —
//!   wall-clock timestamps live only there, never in data files;
//! - `--threads N` caps every worker pool the run creates.

mod analyze;
mod encode;
mod evaluate;
mod gen_prompts;
mod manifest;
mod parse_cmd;
mod report;
mod reproduce;
mod settings;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Inputs that must describe the same stimuli or models do not.
    #[error("join mismatch: {what}")]
    JoinMismatch { what: String },
    #[error("invalid configuration: {what}")]
    InvalidConfig { what: String },
    #[error("output directory {} already has contents; pick a fresh directory", .path.display())]
    OutDirNotEmpty { path: PathBuf },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{n} reproduction target(s) out of tolerance")]
    TargetsMissed { n: usize },
    #[error(transparent)]
    Data(#[from] neuroprobe::dataio::DataError),
    #[error(transparent)]
    Encoder(#[from] neuroprobe::encoder::EncoderError),
    #[error(transparent)]
    Protocol(#[from] neuroprobe::protocol::ProtocolError),
    #[error(transparent)]
    Analysis(#[from] neuroprobe::analysis::AnalysisError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Parser)]
#[command(
    name = "neuroprobe",
    version,
    about = "Brain-alignment scoring, two-turn sycophancy evaluation, and their statistical linkage"
)]
struct Cli {
    /// Cap for all worker pools spawned by this run.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON file supplying defaults (flags and NEUROPROBE_* env vars win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one model's brain alignment from feature/response matrices.
    Encode(encode::EncodeArgs),
    /// Run the two-turn evaluation over a prompt set.
    Evaluate(evaluate::EvaluateArgs),
    /// Join alignment scores with evaluation summaries and run the full
    /// statistical analysis.
    Analyze(analyze::AnalyzeArgs),
    /// Render an analysis report to JSON, CSV tables, or markdown.
    Report(report::ReportArgs),
    /// Classify a single response text.
    Parse(parse_cmd::ParseArgs),
    /// Generate a deterministic synthetic prompt set.
    GenPrompts(gen_prompts::GenPromptsArgs),
    /// Reproduce the published tables from embedded fixtures and print a
    /// pass/fail checklist.
    ReproducePaper(reproduce::ReproduceArgs),
}

fn main() {
    reset_sigpipe();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let resolver = settings::Resolver::new(cli.config.as_deref())?;
    let threads = resolver.usize_value("threads", cli.threads, default_threads())?;
    if threads == 0 {
        return Err(CliError::InvalidConfig {
            what: "threads must be at least 1".into(),
        });
    }
    match cli.command {
        Command::Encode(args) => encode::run(&args, &resolver),
        Command::Evaluate(args) => evaluate::run(&args, &resolver, threads),
        Command::Analyze(args) => analyze::run(&args, &resolver),
        Command::Report(args) => report::run(&args),
        Command::Parse(args) => parse_cmd::run(&args),
        Command::GenPrompts(args) => gen_prompts::run(&args, &resolver),
        Command::ReproducePaper(args) => reproduce::run(&args, &resolver),
    }
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// The Rust runtime ignores SIGPIPE, so writing checklist or parse output
/// into a pipe whose reader has exited (`neuroprobe ... | head`) panics on
/// the failed print instead of terminating quietly. Restore the default
/// disposition so the process dies with SIGPIPE like any other Unix tool.
#[cfg(unix)]
fn reset_sigpipe() {
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
}

#[cfg(not(unix))]
fn reset_sigpipe() {}
