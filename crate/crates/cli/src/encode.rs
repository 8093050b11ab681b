//! `encode`: Stage-1 alignment scoring for one model.
//!
//! Reads a feature matrix and one response matrix per subject (binary
//! `.dmat` payloads with JSON sidecars), verifies that every matrix
//! describes the same stimuli in the same order, then runs the
//! split → cross-validated ridge → predict → correlate → aggregate
//! pipeline and writes the resulting score card.

use crate::manifest::{ensure_fresh_dir, sha256_file, write_atomic, RunManifest};
use crate::settings::Resolver;
use crate::CliError;
use clap::Args;
use neuroprobe::dataio::{read_dmat, sidecar_path, zscore_warnings, MatrixKind};
use neuroprobe::encoder::{score_alignment, AlignmentConfig, SubjectData};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Args)]
pub struct EncodeArgs {
    /// Feature matrix (.dmat) extracted from the model under test.
    #[arg(long)]
    pub features: PathBuf,

    /// Response matrix (.dmat) for one subject; repeat per subject.
    #[arg(long = "responses", required = true)]
    pub responses: Vec<PathBuf>,

    /// Output directory for the score card and manifest.
    #[arg(long)]
    pub out: PathBuf,

    /// Model identifier; defaults to the feature sidecar's id.
    #[arg(long)]
    pub model_id: Option<String>,

    /// Seed for the train/test split and fold shuffling.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Fraction of stimuli held out for scoring.
    #[arg(long)]
    pub test_fraction: Option<f64>,

    /// Cross-validation folds for the ridge strength search.
    #[arg(long)]
    pub k_folds: Option<usize>,

    /// Comma-separated ridge strengths to search (default: built-in grid).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
}

pub fn run(args: &EncodeArgs, resolver: &Resolver) -> Result<(), CliError> {
    let seed = resolver.u64_value("seed", args.seed, 0)?;

    let (features, feat_sidecar) = read_dmat(&args.features)?;
    if feat_sidecar.kind != MatrixKind::Features {
        return Err(CliError::InvalidConfig {
            what: format!("{} is not a feature matrix", args.features.display()),
        });
    }
    for w in zscore_warnings(&features) {
        eprintln!("warning[{}]: {w}", feat_sidecar.id);
    }

    let mut subjects = Vec::with_capacity(args.responses.len());
    for path in &args.responses {
        let (matrix, sidecar) = read_dmat(path)?;
        if sidecar.kind != MatrixKind::Responses {
            return Err(CliError::InvalidConfig {
                what: format!("{} is not a response matrix", path.display()),
            });
        }
        if sidecar.stimulus_ids != feat_sidecar.stimulus_ids {
            let what = first_divergence(&feat_sidecar.stimulus_ids, &sidecar.stimulus_ids)
                .map(|(row, f, s)| {
                    format!(
                        "subject {:?} disagrees with the feature matrix on the \
                         stimulus list at row {row}: {f:?} vs {s:?}",
                        sidecar.id
                    )
                })
                .unwrap_or_else(|| {
                    format!(
                        "subject {:?} lists {} stimuli but the feature matrix has {}",
                        sidecar.id,
                        sidecar.stimulus_ids.len(),
                        feat_sidecar.stimulus_ids.len()
                    )
                });
            return Err(CliError::JoinMismatch { what });
        }
        for w in zscore_warnings(&matrix) {
            eprintln!("warning[{}]: {w}", sidecar.id);
        }
        subjects.push(SubjectData {
            id: sidecar.id.clone(),
            responses: matrix,
            roi_masks: sidecar.roi_masks.clone().unwrap_or_default(),
        });
    }

    let defaults = AlignmentConfig::default();
    let cfg = AlignmentConfig {
        alpha_grid: args.alphas.clone().unwrap_or(defaults.alpha_grid),
        k_folds: args.k_folds.unwrap_or(defaults.k_folds),
        test_fraction: args.test_fraction.unwrap_or(defaults.test_fraction),
        seed,
    };
    let model_id = args.model_id.clone().unwrap_or_else(|| feat_sidecar.id.clone());

    ensure_fresh_dir(&args.out)?;
    let card = score_alignment(&model_id, &features, &subjects, &cfg)?;

    let card_name = format!("score_{model_id}.json");
    let mut bytes = serde_json::to_vec_pretty(&card)?;
    bytes.push(b'\n');
    write_atomic(&args.out.join(&card_name), &bytes)?;

    let mut digests = BTreeMap::new();
    for path in std::iter::once(&args.features).chain(&args.responses) {
        digests.insert(path.display().to_string(), sha256_file(path)?);
        let sc = sidecar_path(path);
        digests.insert(sc.display().to_string(), sha256_file(&sc)?);
    }
    let config = serde_json::json!({
        "command": "encode",
        "model_id": model_id,
        "seed": seed,
        "alpha_grid": cfg.alpha_grid,
        "k_folds": cfg.k_folds,
        "test_fraction": cfg.test_fraction,
    });
    RunManifest::new(
        &config,
        BTreeMap::from([("split".to_string(), seed)]),
        digests,
        vec![card_name.clone()],
    )
    .write(&args.out)?;

    println!(
        "{model_id}: overall alignment {:.4} over {} subject(s) -> {}",
        card.overall,
        subjects.len(),
        args.out.join(card_name).display()
    );
    Ok(())
}

fn first_divergence<'a>(
    a: &'a [String],
    b: &'a [String],
) -> Option<(usize, &'a str, &'a str)> {
    a.iter()
        .zip(b)
        .enumerate()
        .find(|(_, (x, y))| x != y)
        .map(|(i, (x, y))| (i, x.as_str(), y.as_str()))
}
