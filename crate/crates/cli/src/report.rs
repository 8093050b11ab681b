//! `report`: render an existing analysis report into another format —
//! lossless JSON, one CSV per table, or a human-readable markdown page.

use crate::manifest::{ensure_fresh_dir, sha256_file, RunManifest};
use crate::CliError;
use clap::{Args, ValueEnum};
use neuroprobe::analysis::{emit_report, load_report, ReportFormat};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    CsvBundle,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::CsvBundle => ReportFormat::CsvBundle,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Args)]
pub struct ReportArgs {
    /// An analysis report.json produced by `analyze` or `reproduce-paper`.
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "markdown")]
    pub format: FormatArg,

    /// Output directory for the rendered files and manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let report = load_report(&args.input)?;
    ensure_fresh_dir(&args.out)?;
    let written = emit_report(&report, args.format.into(), &args.out)?;

    let config = serde_json::json!({
        "command": "report",
        "format": format!("{:?}", args.format),
    });
    let outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    RunManifest::new(
        &config,
        BTreeMap::new(),
        BTreeMap::from([(args.input.display().to_string(), sha256_file(&args.input)?)]),
        outputs.clone(),
    )
    .write(&args.out)?;

    println!("{} file(s) -> {}", outputs.len(), args.out.display());
    Ok(())
}
