//! `analyze`: join alignment score cards with evaluation summaries and run
//! the full statistical analysis, writing the JSON report.
//!
//! Inputs are either directories of per-model JSON files or, with
//! `--fixtures`, the embedded published tables. Joins are strict: every
//! model must appear on both sides.

use crate::manifest::{ensure_fresh_dir, sha256_file, RunManifest};
use crate::settings::Resolver;
use crate::CliError;
use clap::Args;
use neuroprobe::analysis::{
    emit_report, fixture_inputs, run_full_analysis, AnalysisConfig, ReportFormat,
};
use neuroprobe::dataio::{BrainScoreCard, ModelEvalSummary};
use serde::de::DeserializeOwned;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Directory of alignment score cards (JSON, one per model).
    #[arg(long, conflicts_with = "fixtures")]
    pub brain: Option<PathBuf>,

    /// Directory of evaluation summaries (JSON, one per model).
    #[arg(long, conflicts_with = "fixtures", requires = "brain")]
    pub syco: Option<PathBuf>,

    /// Use the embedded published tables as both inputs.
    #[arg(long)]
    pub fixtures: bool,

    /// Output directory for report.json and the manifest.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Bootstrap resamples for all confidence intervals.
    #[arg(long)]
    pub n_boot: Option<usize>,

    /// Permutation count for all permutation tests.
    #[arg(long)]
    pub n_perm: Option<usize>,
}

/// Read every `*.json` in `dir` (except manifests) as a `T`, sorted by file
/// name for deterministic input order.
fn read_json_dir<T: DeserializeOwned>(dir: &Path) -> Result<Vec<(PathBuf, T)>, CliError> {
    let mut paths = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".json") && !name.ends_with("manifest.json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::InvalidConfig {
            what: format!("{} contains no JSON inputs", dir.display()),
        });
    }
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let value: T = serde_json::from_slice(&bytes).map_err(|e| CliError::InvalidConfig {
            what: format!("{}: {e}", path.display()),
        })?;
        out.push((path, value));
    }
    Ok(out)
}

pub fn run(args: &AnalyzeArgs, resolver: &Resolver) -> Result<(), CliError> {
    let seed = resolver.u64_value("seed", args.seed, 0)?;
    let n_boot = resolver.usize_value("n_boot", args.n_boot, 10_000)?;
    let n_perm = resolver.usize_value("n_perm", args.n_perm, 10_000)?;
    if n_boot < 2000 {
        eprintln!(
            "warning: n_boot = {n_boot} is below 2000; confidence-interval \
             tolerances are not guaranteed"
        );
    }

    let mut digests = BTreeMap::new();
    let (cards, summaries) = if args.fixtures {
        fixture_inputs()
    } else {
        let (brain_dir, syco_dir) = match (&args.brain, &args.syco) {
            (Some(b), Some(s)) => (b, s),
            _ => {
                return Err(CliError::InvalidConfig {
                    what: "pass --fixtures, or both --brain and --syco".into(),
                })
            }
        };
        let cards = read_json_dir::<BrainScoreCard>(brain_dir)?;
        let summaries = read_json_dir::<ModelEvalSummary>(syco_dir)?;
        for path in cards.iter().map(|(p, _)| p).chain(summaries.iter().map(|(p, _)| p)) {
            digests.insert(path.display().to_string(), sha256_file(path)?);
        }
        (
            cards.into_iter().map(|(_, c)| c).collect(),
            summaries.into_iter().map(|(_, s)| s).collect(),
        )
    };

    let cfg = AnalysisConfig {
        seed,
        n_perm,
        n_boot,
        confidence_level: 0.95,
    };
    let report = run_full_analysis(&cards, &summaries, &cfg)?;

    ensure_fresh_dir(&args.out)?;
    let written = emit_report(&report, ReportFormat::Json, &args.out)?;

    let config = serde_json::json!({
        "command": "analyze",
        "seed": seed,
        "n_boot": n_boot,
        "n_perm": n_perm,
        "fixtures": args.fixtures,
    });
    let outputs = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    RunManifest::new(
        &config,
        BTreeMap::from([("analysis".to_string(), seed)]),
        digests,
        outputs,
    )
    .write(&args.out)?;

    println!(
        "{} models analyzed -> {}",
        report.meta.n_models,
        args.out.join("report.json").display()
    );
    Ok(())
}
