//! Stage 3: statistical linkage between alignment scores and capitulation
//! rates, and report emission.
//!
//! [`run_full_analysis`] joins per-model [`BrainScoreCard`]s with per-model
//! [`ModelEvalSummary`]s (strictly, by model id) and delegates to the
//! [`stats`] kernels: per-region and aggregate correlations with analytic,
//! permutation, and bootstrap inference; resistant-vs-susceptible group
//! contrasts; the region-by-category cross-correlation grid;
//! leave-one-out sensitivity; and the per-category / per-tactic /
//! per-difficulty breakdowns.
//!
//! A section is **computed** when the inputs carry the raw data it needs
//! and a **fixture display** otherwise: the published study released only
//! the aggregated tables for some breakdowns (per-category rates per model,
//! per-difficulty rates per model, the tactic ranking, the
//! architecture-family roll-up — the latter with an unstated normalization),
//! so those sections cannot be recomputed from the released numbers. The
//! embedded reference tables are shown instead and every section carries a
//! [`Provenance`] marker in the report metadata so the two cases are never
//! conflated.
//!
//! Randomness policy: one run seed; every randomized component (each
//! permutation test, each bootstrap) draws its own seed from a documented
//! substream of that run seed, so reports are byte-identical across runs
//! and across worker counts.

use crate::dataio::{
    load_fixture_tables, BrainScoreCard, Category, DataError, ModelEvalSummary,
    CATEGORY_DESCRIPTIONS,
};
use crate::rng::SplitMix64;
use crate::stats::{
    self, BcaInterval, GroupComparison, LooSensitivity, PermutationTest, StatsError,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Version stamp embedded in emitted JSON reports.
pub const ANALYSIS_SCHEMA_VERSION: u32 = 1;

/// Substream tag under which all analysis randomness is derived.
const TAG_ANALYSIS: u64 = 0x616e_6c79; // "anly"

/// Capitulation threshold separating resistant from susceptible models.
pub const RESISTANT_THRESHOLD: f64 = 0.5;

/// Fewest models for which the correlational analyses are meaningful.
pub const MIN_MODELS: usize = 5;

#[derive(Debug, Error)]
pub enum AnalysisError {
    /// A model id appears in one input but not the other.
    #[error("brain and capitulation inputs do not join: {what}")]
    JoinMismatch { what: String },
    #[error("need at least {need} models present in both inputs, got {got}")]
    InsufficientModels { got: usize, need: usize },
    #[error("invalid input: {what}")]
    InvalidInput { what: String },
    #[error("model {model_id:?} lacks a rate for category {category}")]
    MissingCategory { model_id: String, category: u8 },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Where a report section's numbers came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Recomputed from the inputs of this run.
    Computed,
    /// Reprinted from the embedded published tables because the inputs do
    /// not carry the underlying per-model data.
    FixtureDisplay,
}

/// Full inferential record for one correlation: point estimates, analytic
/// p-values, a one-tailed permutation test, and a BCa bootstrap interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub r: f64,
    /// Two-tailed p for `r` from the exact t transform.
    pub p_analytic: f64,
    pub spearman_rho: f64,
    pub spearman_p: f64,
    pub perm: PermutationTest,
    pub bca: BcaInterval,
}

/// Region-by-category correlation grid with per-cell significance
/// decisions at the raw level and under both Bonferroni families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossCorrelationMatrix {
    /// Region names, one per row.
    pub rows: Vec<String>,
    /// Category labels, one per column.
    pub cols: Vec<String>,
    /// Number of models each cell correlates over.
    pub n_models: usize,
    pub r: Vec<Vec<f64>>,
    /// Analytic two-tailed p per cell.
    pub p: Vec<Vec<f64>>,
    /// p < 0.05, uncorrected.
    pub significant_raw: Vec<Vec<bool>>,
    /// Bonferroni at one family per region (alpha/6) — the correction the
    /// published analysis applied.
    pub significant_corrected: Vec<Vec<bool>>,
    /// Bonferroni over every cell (alpha/30).
    pub significant_corrected_all: Vec<Vec<bool>>,
}

/// One model's joined headline numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSeriesRow {
    pub model_id: String,
    pub brain_overall: f64,
    pub turn1_rate: f64,
    pub final_rate: f64,
    pub pressure_conversion: f64,
}

/// Capitulation and alignment-association at one difficulty level. When
/// the level's rates are constant across models the correlation is
/// undefined; such rows report no association (r = 0, p = 1) and carry no
/// detail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifficultyRow {
    pub level: u8,
    /// Mean capitulation rate across models at this level.
    pub mean_rate: f64,
    pub r_vs_alignment: f64,
    pub p: f64,
    /// Full inferential record; present only on computed rows with a
    /// defined correlation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<CorrelationReport>,
}

/// Capitulation summary for one misleading-claim category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategorySummaryRow {
    pub category: u8,
    pub description: String,
    /// Mean capitulation rate across models.
    pub mean_rate: f64,
    /// Unbiased standard deviation across models.
    pub std: f64,
    pub r_vs_alignment: f64,
    pub p: f64,
}

/// One row of the tactic-effectiveness ranking.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TacticRow {
    pub rank: u32,
    pub tactic: String,
    pub mean_rate: f64,
    pub std: f64,
}

/// One model's resistance-curve summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceRow {
    pub model_id: String,
    pub aurc: f64,
    pub slope: f64,
    pub breakpoint: u8,
}

/// Vision-encoder family roll-up (published reference values only; the
/// normalization behind the family brain scores was never stated, so this
/// table is never recomputed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArchitectureRow {
    pub family: String,
    pub models: Vec<String>,
    pub brain_score: f64,
    pub mean_rate: f64,
}

/// Seeds, sizes, and provenance of one analysis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub seed: u64,
    pub n_perm: usize,
    pub n_boot: usize,
    pub confidence_level: f64,
    pub n_models: usize,
    /// Models in input order; every index-valued field (leave-one-out
    /// entries) refers to this ordering.
    pub model_ids: Vec<String>,
    pub rois: Vec<String>,
    /// Section name → where its numbers came from.
    pub sections: BTreeMap<String, Provenance>,
}

/// Everything stage 3 produces, in one serializable value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub meta: RunMetadata,
    /// Joined per-model headline numbers, in input order.
    pub series: Vec<ModelSeriesRow>,
    /// Per-region correlation of alignment score with final capitulation.
    pub roi_correlations: BTreeMap<String, CorrelationReport>,
    /// Overall alignment score vs final capitulation.
    pub aggregate: CorrelationReport,
    pub resistant_models: Vec<String>,
    pub susceptible_models: Vec<String>,
    /// Per-region contrast of resistant vs susceptible alignment scores.
    /// Empty when either group has fewer than two models.
    pub group_comparisons: BTreeMap<String, GroupComparison>,
    pub cross_matrix: CrossCorrelationMatrix,
    /// Per-region leave-one-out sensitivity of the correlation.
    pub loo: BTreeMap<String, LooSensitivity>,
    pub per_difficulty: Vec<DifficultyRow>,
    pub category_summary: Vec<CategorySummaryRow>,
    pub tactic_ranking: Vec<TacticRow>,
    pub resistance: Vec<ResistanceRow>,
    pub architecture_families: Vec<ArchitectureRow>,
}

/// Knobs for one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub seed: u64,
    pub n_perm: usize,
    pub n_boot: usize,
    pub confidence_level: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_perm: 10_000,
            n_boot: 10_000,
            confidence_level: 0.95,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.n_perm < 1000 {
            return Err(AnalysisError::InvalidInput {
                what: "n_perm must be at least 1000".into(),
            });
        }
        if self.n_boot < 100 {
            return Err(AnalysisError::InvalidInput {
                what: "n_boot must be at least 100".into(),
            });
        }
        if !(0.0 < self.confidence_level && self.confidence_level < 1.0) {
            return Err(AnalysisError::InvalidInput {
                what: "confidence level must lie strictly between 0 and 1".into(),
            });
        }
        Ok(())
    }
}

/// One derived seed per randomized component, from the run seed.
fn section_seed(run_seed: u64, index: u64) -> u64 {
    SplitMix64::substream(run_seed, TAG_ANALYSIS, index).next_u64()
}

fn correlate(
    x: &[f64],
    y: &[f64],
    cfg: &AnalysisConfig,
    seed_perm: u64,
    seed_boot: u64,
) -> Result<CorrelationReport, AnalysisError> {
    let n = x.len();
    let r = stats::pearson(x, y)?;
    let p_analytic = stats::p_from_r(r, n)?;
    let spearman_rho = stats::spearman(x, y)?;
    let spearman_p = stats::p_from_r(spearman_rho, n)?;
    let perm = stats::perm_test_negative(x, y, cfg.n_perm, seed_perm)?;
    let bca = stats::bca_ci_paired(
        x,
        y,
        stats::pearson,
        cfg.confidence_level,
        cfg.n_boot,
        seed_boot,
    )?;
    Ok(CorrelationReport {
        n,
        r,
        p_analytic,
        spearman_rho,
        spearman_p,
        perm,
        bca,
    })
}

fn sample_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Pearson r and analytic p, degrading a constant input to "no measurable
/// association" (r = 0, p = 1) instead of failing — a difficulty level at
/// which every model behaves identically carries no signal either way.
fn r_or_flat(x: &[f64], y: &[f64]) -> Result<(f64, f64), AnalysisError> {
    match stats::pearson(x, y) {
        Ok(r) => Ok((r, stats::p_from_r(r, x.len())?)),
        Err(StatsError::ConstantInput { .. }) => Ok((0.0, 1.0)),
        Err(e) => Err(e.into()),
    }
}

/// How a breakdown section will be produced, given which summaries carry
/// its raw data.
fn section_mode(
    with_data: usize,
    total: usize,
    section: &str,
) -> Result<Provenance, AnalysisError> {
    if with_data == total {
        Ok(Provenance::Computed)
    } else if with_data == 0 {
        Ok(Provenance::FixtureDisplay)
    } else {
        Err(AnalysisError::InvalidInput {
            what: format!(
                "{with_data} of {total} models carry {section} data; \
                 all or none must"
            ),
        })
    }
}

/// Region-by-category correlation grid from score cards and per-model
/// per-category capitulation rates. Cards define the model order; the join
/// is strict in both directions and every model must carry a rate for all
/// five categories.
pub fn cross_correlation(
    cards: &[BrainScoreCard],
    per_category: &BTreeMap<String, BTreeMap<Category, f64>>,
) -> Result<CrossCorrelationMatrix, AnalysisError> {
    if cards.is_empty() {
        return Err(AnalysisError::InvalidInput {
            what: "no score cards".into(),
        });
    }
    let rois: Vec<String> = cards[0].per_roi.keys().cloned().collect();
    let mut seen = BTreeSet::new();
    for card in cards {
        if !seen.insert(card.model_id.as_str()) {
            return Err(AnalysisError::InvalidInput {
                what: format!("duplicate score card for {:?}", card.model_id),
            });
        }
        let card_rois: Vec<&String> = card.per_roi.keys().collect();
        if card_rois.len() != rois.len() || card_rois.iter().zip(&rois).any(|(a, b)| *a != b) {
            return Err(AnalysisError::InvalidInput {
                what: format!("score cards disagree on the region set at {:?}", card.model_id),
            });
        }
        let rates = per_category
            .get(&card.model_id)
            .ok_or_else(|| AnalysisError::JoinMismatch {
                what: format!("no category rates for {:?}", card.model_id),
            })?;
        for cat in Category::ALL {
            if !rates.contains_key(&cat) {
                return Err(AnalysisError::MissingCategory {
                    model_id: card.model_id.clone(),
                    category: cat.index(),
                });
            }
        }
    }
    if let Some(stray) = per_category.keys().find(|m| !seen.contains(m.as_str())) {
        return Err(AnalysisError::JoinMismatch {
            what: format!("category rates for {stray:?} have no score card"),
        });
    }

    let n_models = cards.len();
    let cols: Vec<String> = CATEGORY_DESCRIPTIONS.iter().map(|s| s.to_string()).collect();
    let mut r = Vec::with_capacity(rois.len());
    let mut p = Vec::with_capacity(rois.len());
    for roi in &rois {
        let xs: Vec<f64> = cards.iter().map(|c| c.per_roi[roi]).collect();
        let mut r_row = Vec::with_capacity(Category::ALL.len());
        let mut p_row = Vec::with_capacity(Category::ALL.len());
        for cat in Category::ALL {
            let ys: Vec<f64> = cards
                .iter()
                .map(|c| per_category[&c.model_id][&cat])
                .collect();
            let (rr, pp) = r_or_flat(&xs, &ys)?;
            r_row.push(rr);
            p_row.push(pp);
        }
        r.push(r_row);
        p.push(p_row);
    }
    Ok(assemble_cross_matrix(rois, cols, n_models, r, p))
}

fn assemble_cross_matrix(
    rows: Vec<String>,
    cols: Vec<String>,
    n_models: usize,
    r: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
) -> CrossCorrelationMatrix {
    let flat: Vec<f64> = p.iter().flatten().copied().collect();
    let per_row = stats::bonferroni(&flat, 0.05, rows.len()).expect("valid p grid");
    let per_cell =
        stats::bonferroni(&flat, 0.05, rows.len() * cols.len()).expect("valid p grid");
    let reshape = |flags: &[bool]| -> Vec<Vec<bool>> {
        flags.chunks(cols.len()).map(<[bool]>::to_vec).collect()
    };
    CrossCorrelationMatrix {
        significant_raw: reshape(&per_row.raw_significant),
        significant_corrected: reshape(&per_row.corrected_significant),
        significant_corrected_all: reshape(&per_cell.corrected_significant),
        rows,
        cols,
        n_models,
        r,
        p,
    }
}

/// The published cross-correlation grid as a display (the per-model
/// per-category rates behind it were never released). Analytic p-values
/// are recomputed from the printed coefficients at the published model
/// count.
fn fixture_cross_matrix() -> CrossCorrelationMatrix {
    let tables = load_fixture_tables();
    let n = tables.model_order.len();
    let rows: Vec<String> = tables.cross_category.iter().map(|(roi, _)| roi.clone()).collect();
    let cols: Vec<String> = CATEGORY_DESCRIPTIONS.iter().map(|s| s.to_string()).collect();
    let r: Vec<Vec<f64>> = tables
        .cross_category
        .iter()
        .map(|(_, vals)| vals.to_vec())
        .collect();
    let p: Vec<Vec<f64>> = r
        .iter()
        .map(|row| {
            row.iter()
                .map(|&rr| stats::p_from_r(rr, n).expect("validated fixture"))
                .collect()
        })
        .collect();
    assemble_cross_matrix(rows, cols, n, r, p)
}

/// The embedded published tables reshaped as run inputs: one score card
/// and one capitulation summary per published model. The per-subject,
/// per-category, per-difficulty, and per-tactic breakdowns were not
/// released, so those maps are empty and the corresponding report sections
/// fall back to fixture displays.
pub fn fixture_inputs() -> (Vec<BrainScoreCard>, Vec<ModelEvalSummary>) {
    let tables = load_fixture_tables();
    let mut cards = Vec::with_capacity(tables.model_order.len());
    let mut summaries = Vec::with_capacity(tables.model_order.len());
    for name in &tables.model_order {
        let brain = &tables.brain[name];
        cards.push(BrainScoreCard {
            model_id: name.clone(),
            overall: brain.overall,
            per_roi: brain.per_roi.clone(),
            per_subject_overall: BTreeMap::new(),
            per_subject_per_roi: BTreeMap::new(),
            selected_alphas: BTreeMap::new(),
        });
        let syco = &tables.sycophancy[name];
        let res = &tables.resistance[name];
        summaries.push(ModelEvalSummary {
            model_id: name.clone(),
            n_trials: 6400,
            n_unclear: 0,
            n_errors: 0,
            turn1_rate: syco.turn1_rate,
            final_rate: syco.final_rate,
            pressure_conversion: syco.pressure_conversion,
            pi_defined: true,
            per_category: BTreeMap::new(),
            per_difficulty: BTreeMap::new(),
            per_tactic: BTreeMap::new(),
            aurc: res.aurc,
            slope: res.slope,
            breakpoint: res.breakpoint,
        });
    }
    (cards, summaries)
}

/// Join score cards with capitulation summaries and compute every report
/// section. The join is strict by model id in both directions; summaries
/// define the model order used everywhere downstream.
pub fn run_full_analysis(
    cards: &[BrainScoreCard],
    summaries: &[ModelEvalSummary],
    cfg: &AnalysisConfig,
) -> Result<AnalysisReport, AnalysisError> {
    cfg.validate()?;
    let mut cards_by_id: BTreeMap<&str, &BrainScoreCard> = BTreeMap::new();
    for card in cards {
        card.validate()?;
        if cards_by_id.insert(card.model_id.as_str(), card).is_some() {
            return Err(AnalysisError::InvalidInput {
                what: format!("duplicate score card for {:?}", card.model_id),
            });
        }
    }
    let mut seen = BTreeSet::new();
    for s in summaries {
        s.validate()?;
        if !seen.insert(s.model_id.as_str()) {
            return Err(AnalysisError::InvalidInput {
                what: format!("duplicate capitulation summary for {:?}", s.model_id),
            });
        }
        if !cards_by_id.contains_key(s.model_id.as_str()) {
            return Err(AnalysisError::JoinMismatch {
                what: format!("{:?} has a capitulation summary but no score card", s.model_id),
            });
        }
    }
    if let Some(orphan) = cards_by_id.keys().find(|id| !seen.contains(*id)) {
        return Err(AnalysisError::JoinMismatch {
            what: format!("{orphan:?} has a score card but no capitulation summary"),
        });
    }
    if summaries.len() < MIN_MODELS {
        return Err(AnalysisError::InsufficientModels {
            got: summaries.len(),
            need: MIN_MODELS,
        });
    }

    let ordered_cards: Vec<&BrainScoreCard> = summaries
        .iter()
        .map(|s| cards_by_id[s.model_id.as_str()])
        .collect();
    let rois: Vec<String> = ordered_cards[0].per_roi.keys().cloned().collect();
    for card in &ordered_cards {
        let card_rois: Vec<&String> = card.per_roi.keys().collect();
        if card_rois.len() != rois.len() || card_rois.iter().zip(&rois).any(|(a, b)| *a != b) {
            return Err(AnalysisError::InvalidInput {
                what: format!("score cards disagree on the region set at {:?}", card.model_id),
            });
        }
    }

    let model_ids: Vec<String> = summaries.iter().map(|s| s.model_id.clone()).collect();
    let overall: Vec<f64> = ordered_cards.iter().map(|c| c.overall).collect();
    let finals: Vec<f64> = summaries.iter().map(|s| s.final_rate).collect();

    let series: Vec<ModelSeriesRow> = summaries
        .iter()
        .zip(&ordered_cards)
        .map(|(s, c)| ModelSeriesRow {
            model_id: s.model_id.clone(),
            brain_overall: c.overall,
            turn1_rate: s.turn1_rate,
            final_rate: s.final_rate,
            pressure_conversion: s.pressure_conversion,
        })
        .collect();

    // Seed layout: 0..2 aggregate, 2 + 2j per-region, 100 + j group
    // contrasts, 200 + 2*level per-difficulty details.
    let aggregate = correlate(
        &overall,
        &finals,
        cfg,
        section_seed(cfg.seed, 0),
        section_seed(cfg.seed, 1),
    )?;

    let mut roi_correlations = BTreeMap::new();
    let mut loo = BTreeMap::new();
    for (j, roi) in rois.iter().enumerate() {
        let xs: Vec<f64> = ordered_cards.iter().map(|c| c.per_roi[roi]).collect();
        let report = correlate(
            &xs,
            &finals,
            cfg,
            section_seed(cfg.seed, 2 + 2 * j as u64),
            section_seed(cfg.seed, 3 + 2 * j as u64),
        )?;
        roi_correlations.insert(roi.clone(), report);
        loo.insert(roi.clone(), stats::loo_sensitivity(&xs, &finals)?);
    }

    let resistant_models: Vec<String> = summaries
        .iter()
        .filter(|s| s.final_rate < RESISTANT_THRESHOLD)
        .map(|s| s.model_id.clone())
        .collect();
    let susceptible_models: Vec<String> = summaries
        .iter()
        .filter(|s| s.final_rate >= RESISTANT_THRESHOLD)
        .map(|s| s.model_id.clone())
        .collect();

    let mut group_comparisons = BTreeMap::new();
    if resistant_models.len() >= 2 && susceptible_models.len() >= 2 {
        for (j, roi) in rois.iter().enumerate() {
            let pick = |ids: &[String]| -> Vec<f64> {
                ids.iter().map(|id| cards_by_id[id.as_str()].per_roi[roi]).collect()
            };
            let a = pick(&resistant_models);
            let b = pick(&susceptible_models);
            group_comparisons.insert(
                roi.clone(),
                stats::cohens_d(
                    &a,
                    &b,
                    cfg.confidence_level,
                    cfg.n_boot,
                    section_seed(cfg.seed, 100 + j as u64),
                )?,
            );
        }
    }

    // Breakdown sections: computed when every summary carries the raw
    // per-model data, fixture displays when none does.
    let n = summaries.len();
    let complete_cats = summaries
        .iter()
        .filter(|s| Category::ALL.iter().all(|c| s.per_category.contains_key(c)))
        .count();
    let with_any_cats = summaries.iter().filter(|s| !s.per_category.is_empty()).count();
    if with_any_cats != complete_cats {
        return Err(AnalysisError::InvalidInput {
            what: "some models carry partial category rates".into(),
        });
    }
    let cat_mode = section_mode(with_any_cats, n, "per-category")?;

    let complete_levels = summaries
        .iter()
        .filter(|s| (1..=10u8).all(|l| s.per_difficulty.contains_key(&l)))
        .count();
    let with_any_levels = summaries.iter().filter(|s| !s.per_difficulty.is_empty()).count();
    if with_any_levels != complete_levels {
        return Err(AnalysisError::InvalidInput {
            what: "some models carry partial difficulty rates".into(),
        });
    }
    let level_mode = section_mode(with_any_levels, n, "per-difficulty")?;

    let with_tactics = summaries.iter().filter(|s| !s.per_tactic.is_empty()).count();
    let tactic_mode = section_mode(with_tactics, n, "per-tactic")?;

    let tables = load_fixture_tables();

    let (cross_matrix, cross_mode) = match cat_mode {
        Provenance::Computed => {
            let rates: BTreeMap<String, BTreeMap<Category, f64>> = summaries
                .iter()
                .map(|s| (s.model_id.clone(), s.per_category.clone()))
                .collect();
            let owned: Vec<BrainScoreCard> =
                ordered_cards.iter().map(|c| (*c).clone()).collect();
            (cross_correlation(&owned, &rates)?, Provenance::Computed)
        }
        Provenance::FixtureDisplay => (fixture_cross_matrix(), Provenance::FixtureDisplay),
    };

    let category_summary = match cat_mode {
        Provenance::Computed => Category::ALL
            .iter()
            .map(|cat| {
                let ys: Vec<f64> = summaries.iter().map(|s| s.per_category[cat]).collect();
                let (mean_rate, std) = sample_mean_std(&ys);
                let (r, p) = r_or_flat(&overall, &ys)?;
                Ok(CategorySummaryRow {
                    category: cat.index(),
                    description: cat.description().to_string(),
                    mean_rate,
                    std,
                    r_vs_alignment: r,
                    p,
                })
            })
            .collect::<Result<Vec<_>, AnalysisError>>()?,
        Provenance::FixtureDisplay => tables
            .category_rates
            .iter()
            .map(|f| CategorySummaryRow {
                category: f.category,
                description: f.description.clone(),
                mean_rate: f.mean_rate,
                std: f.std,
                r_vs_alignment: f.r_vs_alignment,
                p: f.p,
            })
            .collect(),
    };

    let per_difficulty = match level_mode {
        Provenance::Computed => (1..=10u8)
            .map(|level| {
                let ys: Vec<f64> = summaries.iter().map(|s| s.per_difficulty[&level]).collect();
                let (mean_rate, _) = sample_mean_std(&ys);
                // A constant series (every model identical at this level)
                // has no defined correlation; report it as flat.
                let detail = match correlate(
                    &overall,
                    &ys,
                    cfg,
                    section_seed(cfg.seed, 200 + 2 * u64::from(level)),
                    section_seed(cfg.seed, 201 + 2 * u64::from(level)),
                ) {
                    Ok(d) => Some(d),
                    Err(AnalysisError::Stats(StatsError::ConstantInput { .. })) => None,
                    Err(e) => return Err(e),
                };
                let (r, p) = match &detail {
                    Some(d) => (d.r, d.p_analytic),
                    None => (0.0, 1.0),
                };
                Ok(DifficultyRow {
                    level,
                    mean_rate,
                    r_vs_alignment: r,
                    p,
                    detail,
                })
            })
            .collect::<Result<Vec<_>, AnalysisError>>()?,
        Provenance::FixtureDisplay => tables
            .difficulty_levels
            .iter()
            .map(|f| DifficultyRow {
                level: f.level,
                mean_rate: f.mean_rate,
                r_vs_alignment: f.r_vs_alignment,
                p: f.p,
                detail: None,
            })
            .collect(),
    };

    let tactic_ranking = match tactic_mode {
        Provenance::Computed => {
            let tactic_set: BTreeSet<&String> = summaries[0].per_tactic.keys().collect();
            for s in &summaries[1..] {
                if s.per_tactic.keys().collect::<BTreeSet<_>>() != tactic_set {
                    return Err(AnalysisError::InvalidInput {
                        what: "models disagree on the tactic set".into(),
                    });
                }
            }
            let mut rows: Vec<(String, f64, f64)> = tactic_set
                .iter()
                .map(|t| {
                    let ys: Vec<f64> = summaries.iter().map(|s| s.per_tactic[*t]).collect();
                    let (mean, std) = sample_mean_std(&ys);
                    ((*t).clone(), mean, std)
                })
                .collect();
            rows.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("finite rates")
                    .then_with(|| a.0.cmp(&b.0))
            });
            rows.into_iter()
                .enumerate()
                .map(|(i, (tactic, mean_rate, std))| TacticRow {
                    rank: i as u32 + 1,
                    tactic,
                    mean_rate,
                    std,
                })
                .collect()
        }
        Provenance::FixtureDisplay => tables
            .tactic_ranking
            .iter()
            .map(|f| TacticRow {
                rank: f.rank,
                tactic: f.tactic.clone(),
                mean_rate: f.mean_rate,
                std: f.std,
            })
            .collect(),
    };

    let resistance: Vec<ResistanceRow> = summaries
        .iter()
        .map(|s| ResistanceRow {
            model_id: s.model_id.clone(),
            aurc: s.aurc,
            slope: s.slope,
            breakpoint: s.breakpoint,
        })
        .collect();

    let architecture_families: Vec<ArchitectureRow> = tables
        .architecture_families
        .iter()
        .map(|f| ArchitectureRow {
            family: f.family.clone(),
            models: f.models.clone(),
            brain_score: f.brain_score,
            mean_rate: f.mean_rate,
        })
        .collect();

    let mut sections = BTreeMap::new();
    for (name, prov) in [
        ("series", Provenance::Computed),
        ("roi_correlations", Provenance::Computed),
        ("aggregate", Provenance::Computed),
        ("group_comparisons", Provenance::Computed),
        ("loo", Provenance::Computed),
        ("resistance", Provenance::Computed),
        ("cross_matrix", cross_mode),
        ("category_summary", cat_mode),
        ("per_difficulty", level_mode),
        ("tactic_ranking", tactic_mode),
        ("architecture_families", Provenance::FixtureDisplay),
    ] {
        sections.insert(name.to_string(), prov);
    }

    Ok(AnalysisReport {
        meta: RunMetadata {
            schema_version: ANALYSIS_SCHEMA_VERSION,
            seed: cfg.seed,
            n_perm: cfg.n_perm,
            n_boot: cfg.n_boot,
            confidence_level: cfg.confidence_level,
            n_models: summaries.len(),
            model_ids,
            rois,
            sections,
        },
        series,
        roi_correlations,
        aggregate,
        resistant_models,
        susceptible_models,
        group_comparisons,
        cross_matrix,
        loo,
        per_difficulty,
        category_summary,
        tactic_ranking,
        resistance,
        architecture_families,
    })
}

/// Output encodings for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// One schema-versioned `report.json` that round-trips losslessly.
    Json,
    /// One CSV per table, mirroring the published table layouts, plus
    /// plot-ready series (scatter, leave-one-out bars, effect sizes).
    CsvBundle,
    /// One human-readable `report.md`.
    Markdown,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AnalysisError> {
    let io_err = |source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Render the report to files under `out_dir` (created if absent) and
/// return the paths written.
pub fn emit_report(
    report: &AnalysisReport,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    std::fs::create_dir_all(out_dir).map_err(|source| AnalysisError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            let mut bytes = serde_json::to_vec_pretty(report)?;
            bytes.push(b'\n');
            write_atomic(&path, &bytes)?;
            Ok(vec![path])
        }
        ReportFormat::CsvBundle => emit_csv_bundle(report, out_dir),
        ReportFormat::Markdown => {
            let path = out_dir.join("report.md");
            write_atomic(&path, render_markdown(report).as_bytes())?;
            Ok(vec![path])
        }
    }
}

/// Load a previously emitted JSON report.
pub fn load_report(path: &Path) -> Result<AnalysisReport, AnalysisError> {
    let bytes = std::fs::read(path).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn emit_csv_bundle(
    report: &AnalysisReport,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, AnalysisError> {
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<(), AnalysisError> {
        let path = out_dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
        Ok(())
    };

    let mut body = String::from("model,brain_overall,turn1_rate,final_rate,pressure_conversion\n");
    for row in &report.series {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            row.model_id, row.brain_overall, row.turn1_rate, row.final_rate,
            row.pressure_conversion
        ));
    }
    emit("model_summary.csv", body)?;

    let mut body = String::from("roi,r,perm_p,bca_low,bca_high,excludes_zero,loo_all_negative\n");
    for (roi, rep) in &report.roi_correlations {
        body.push_str(&format!(
            "{roi},{},{},{},{},{},{}\n",
            rep.r,
            rep.perm.p_one_tailed_negative,
            rep.bca.low,
            rep.bca.high,
            rep.bca.excludes_zero(),
            report.loo[roi].all_negative
        ));
    }
    emit("roi_correlations.csv", body)?;

    let a = &report.aggregate;
    emit(
        "aggregate.csv",
        format!(
            "n,r,p_analytic,spearman_rho,spearman_p,perm_p,bca_low,bca_high\n\
             {},{},{},{},{},{},{},{}\n",
            a.n,
            a.r,
            a.p_analytic,
            a.spearman_rho,
            a.spearman_p,
            a.perm.p_one_tailed_negative,
            a.bca.low,
            a.bca.high
        ),
    )?;

    let mut body = String::from(
        "roi,n_resistant,n_susceptible,mean_resistant,mean_susceptible,delta,d,\
         d_ci_low,d_ci_high,d_population,t,df,p\n",
    );
    for (roi, g) in &report.group_comparisons {
        body.push_str(&format!(
            "{roi},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            g.n_a, g.n_b, g.mean_a, g.mean_b, g.delta, g.d, g.d_ci.low, g.d_ci.high,
            g.d_population, g.t, g.df, g.p_two_tailed
        ));
    }
    emit("group_comparisons.csv", body)?;

    let m = &report.cross_matrix;
    let mut body =
        String::from("roi,category,r,p,significant_raw,significant_corrected,significant_corrected_all\n");
    for (j, roi) in m.rows.iter().enumerate() {
        for (l, cat) in m.cols.iter().enumerate() {
            body.push_str(&format!(
                "{roi},{cat},{},{},{},{},{}\n",
                m.r[j][l],
                m.p[j][l],
                m.significant_raw[j][l],
                m.significant_corrected[j][l],
                m.significant_corrected_all[j][l]
            ));
        }
    }
    emit("cross_matrix.csv", body)?;

    let mut body = String::from("roi,dropped_model,r\n");
    for (roi, sens) in &report.loo {
        for entry in &sens.entries {
            let model = report
                .meta
                .model_ids
                .get(entry.index)
                .map(String::as_str)
                .unwrap_or("?");
            match entry.r {
                Some(r) => body.push_str(&format!("{roi},{model},{r}\n")),
                None => body.push_str(&format!("{roi},{model},\n")),
            }
        }
    }
    emit("loo.csv", body)?;

    let mut body = String::from("level,mean_rate,r,p\n");
    for row in &report.per_difficulty {
        body.push_str(&format!(
            "{},{},{},{}\n",
            row.level, row.mean_rate, row.r_vs_alignment, row.p
        ));
    }
    emit("difficulty_levels.csv", body)?;

    let mut body = String::from("category,description,mean_rate,std,r,p\n");
    for row in &report.category_summary {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.category, row.description, row.mean_rate, row.std, row.r_vs_alignment, row.p
        ));
    }
    emit("category_summary.csv", body)?;

    let mut body = String::from("rank,tactic,mean_rate,std\n");
    for row in &report.tactic_ranking {
        body.push_str(&format!(
            "{},{},{},{}\n",
            row.rank, row.tactic, row.mean_rate, row.std
        ));
    }
    emit("tactic_ranking.csv", body)?;

    let mut body = String::from("model,aurc,slope,breakpoint\n");
    for row in &report.resistance {
        body.push_str(&format!(
            "{},{},{},{}\n",
            row.model_id, row.aurc, row.slope, row.breakpoint
        ));
    }
    emit("resistance.csv", body)?;

    let mut body = String::from("family,models,brain_score,mean_rate\n");
    for row in &report.architecture_families {
        body.push_str(&format!(
            "{},{},{},{}\n",
            row.family,
            row.models.join(";"),
            row.brain_score,
            row.mean_rate
        ));
    }
    emit("architecture_families.csv", body)?;

    // Plot-ready series.
    let mut body = String::from("model,brain_overall,final_rate\n");
    for row in &report.series {
        body.push_str(&format!(
            "{},{},{}\n",
            row.model_id, row.brain_overall, row.final_rate
        ));
    }
    emit("scatter_brain_vs_final.csv", body)?;

    let mut body = String::from("roi,d,ci_low,ci_high\n");
    for (roi, g) in &report.group_comparisons {
        body.push_str(&format!("{roi},{},{},{}\n", g.d, g.d_ci.low, g.d_ci.high));
    }
    emit("effect_sizes.csv", body)?;

    Ok(written)
}

fn provenance_note(report: &AnalysisReport, section: &str) -> &'static str {
    match report.meta.sections.get(section) {
        Some(Provenance::FixtureDisplay) => {
            " _(published reference values; inputs carry no per-model data for this table)_"
        }
        _ => "",
    }
}

fn render_markdown(report: &AnalysisReport) -> String {
    use std::fmt::Write as _;
    let mut md = String::new();
    let meta = &report.meta;
    writeln!(md, "# Alignment vs capitulation analysis\n").unwrap();
    writeln!(
        md,
        "{} models | seed {} | {} permutations | {} bootstrap resamples | {:.0}% CIs\n",
        meta.n_models,
        meta.seed,
        meta.n_perm,
        meta.n_boot,
        meta.confidence_level * 100.0
    )
    .unwrap();

    writeln!(md, "## Model summary\n").unwrap();
    writeln!(
        md,
        "| Model | Brain score | Turn-1 rate | Final rate | Pressure conversion |"
    )
    .unwrap();
    writeln!(md, "|---|---|---|---|---|").unwrap();
    for row in &report.series {
        writeln!(
            md,
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            row.model_id, row.brain_overall, row.turn1_rate, row.final_rate,
            row.pressure_conversion
        )
        .unwrap();
    }

    let a = &report.aggregate;
    writeln!(md, "\n## Alignment vs final capitulation\n").unwrap();
    writeln!(
        md,
        "Overall: r = {:.3} (analytic p = {:.3}, permutation p = {:.3}, \
         {:.0}% BCa [{:.3}, {:.3}]), Spearman rho = {:.3} (p = {:.3}).\n",
        a.r,
        a.p_analytic,
        a.perm.p_one_tailed_negative,
        a.bca.level * 100.0,
        a.bca.low,
        a.bca.high,
        a.spearman_rho,
        a.spearman_p
    )
    .unwrap();
    writeln!(
        md,
        "| Region | r | Permutation p | BCa low | BCa high | Excludes 0 | All LOO negative |"
    )
    .unwrap();
    writeln!(md, "|---|---|---|---|---|---|---|").unwrap();
    for (roi, rep) in &report.roi_correlations {
        writeln!(
            md,
            "| {roi} | {:.3} | {:.3} | {:.3} | {:.3} | {} | {} |",
            rep.r,
            rep.perm.p_one_tailed_negative,
            rep.bca.low,
            rep.bca.high,
            rep.bca.excludes_zero(),
            report.loo[roi].all_negative
        )
        .unwrap();
    }

    writeln!(md, "\n## Resistant vs susceptible contrast\n").unwrap();
    writeln!(
        md,
        "Resistant (final rate < {RESISTANT_THRESHOLD}): {}. Susceptible: {}.\n",
        report.resistant_models.join(", "),
        report.susceptible_models.join(", ")
    )
    .unwrap();
    if report.group_comparisons.is_empty() {
        writeln!(
            md,
            "_Contrast skipped: fewer than two models on one side of the threshold._"
        )
        .unwrap();
    } else {
        writeln!(
            md,
            "| Region | Resistant mean | Susceptible mean | Delta | d | d CI | t | p |"
        )
        .unwrap();
        writeln!(md, "|---|---|---|---|---|---|---|---|").unwrap();
        for (roi, g) in &report.group_comparisons {
            writeln!(
                md,
                "| {roi} | {:.3} | {:.3} | {:.4} | {:.2} | [{:.2}, {:.2}] | {:.2} | {:.3} |",
                g.mean_a, g.mean_b, g.delta, g.d, g.d_ci.low, g.d_ci.high, g.t, g.p_two_tailed
            )
            .unwrap();
        }
    }

    let m = &report.cross_matrix;
    writeln!(
        md,
        "\n## Region x category cross-correlation{}\n",
        provenance_note(report, "cross_matrix")
    )
    .unwrap();
    writeln!(md, "| Region | {} |", m.cols.join(" | ")).unwrap();
    writeln!(md, "|---|{}|", "---|".repeat(m.cols.len())).unwrap();
    for (j, roi) in m.rows.iter().enumerate() {
        let cells: Vec<String> = (0..m.cols.len())
            .map(|l| {
                let star = if m.significant_corrected[j][l] {
                    "**"
                } else if m.significant_raw[j][l] {
                    "*"
                } else {
                    ""
                };
                format!("{:.3}{star}", m.r[j][l])
            })
            .collect();
        writeln!(md, "| {roi} | {} |", cells.join(" | ")).unwrap();
    }
    writeln!(
        md,
        "\n\\* p < 0.05 uncorrected; \\*\\* survives Bonferroni at alpha/{}.",
        m.rows.len()
    )
    .unwrap();

    writeln!(
        md,
        "\n## Capitulation by category{}\n",
        provenance_note(report, "category_summary")
    )
    .unwrap();
    writeln!(md, "| Category | Mean rate | SD | r vs alignment | p |").unwrap();
    writeln!(md, "|---|---|---|---|---|").unwrap();
    for row in &report.category_summary {
        writeln!(
            md,
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
            row.description, row.mean_rate, row.std, row.r_vs_alignment, row.p
        )
        .unwrap();
    }

    writeln!(
        md,
        "\n## Tactic effectiveness{}\n",
        provenance_note(report, "tactic_ranking")
    )
    .unwrap();
    writeln!(md, "| Rank | Tactic | Mean rate | SD |").unwrap();
    writeln!(md, "|---|---|---|---|").unwrap();
    for row in &report.tactic_ranking {
        writeln!(
            md,
            "| {} | {} | {:.3} | {:.3} |",
            row.rank, row.tactic, row.mean_rate, row.std
        )
        .unwrap();
    }

    writeln!(
        md,
        "\n## Capitulation by difficulty{}\n",
        provenance_note(report, "per_difficulty")
    )
    .unwrap();
    writeln!(md, "| Level | Mean rate | r vs alignment | p |").unwrap();
    writeln!(md, "|---|---|---|---|").unwrap();
    for row in &report.per_difficulty {
        writeln!(
            md,
            "| {} | {:.3} | {:.3} | {:.3} |",
            row.level, row.mean_rate, row.r_vs_alignment, row.p
        )
        .unwrap();
    }

    writeln!(md, "\n## Resistance curves\n").unwrap();
    writeln!(md, "| Model | AURC | Slope | Breakpoint |").unwrap();
    writeln!(md, "|---|---|---|---|").unwrap();
    for row in &report.resistance {
        let bp = if row.breakpoint == 11 {
            "never".to_string()
        } else {
            row.breakpoint.to_string()
        };
        writeln!(
            md,
            "| {} | {:.3} | {:.4} | {bp} |",
            row.model_id, row.aurc, row.slope
        )
        .unwrap();
    }

    writeln!(md, "\n## Leave-one-out sensitivity\n").unwrap();
    writeln!(md, "| Region | Full r | Min LOO r | Max LOO r | Most influential | All negative |").unwrap();
    writeln!(md, "|---|---|---|---|---|---|").unwrap();
    for (roi, sens) in &report.loo {
        let defined: Vec<f64> = sens.entries.iter().filter_map(|e| e.r).collect();
        let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
        let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let influential = report
            .meta
            .model_ids
            .get(sens.most_influential)
            .map(String::as_str)
            .unwrap_or("?");
        writeln!(
            md,
            "| {roi} | {:.3} | {:.3} | {:.3} | {influential} | {} |",
            sens.r_full, min, max, sens.all_negative
        )
        .unwrap();
    }

    writeln!(
        md,
        "\n## Architecture families{}\n",
        provenance_note(report, "architecture_families")
    )
    .unwrap();
    writeln!(
        md,
        "_The family-level brain scores below use an unpublished normalization \
         and are reprinted, not recomputed._\n"
    )
    .unwrap();
    writeln!(md, "| Family | Models | Brain score | Mean rate |").unwrap();
    writeln!(md, "|---|---|---|---|").unwrap();
    for row in &report.architecture_families {
        writeln!(
            md,
            "| {} | {} | {:.3} | {:.3} |",
            row.family,
            row.models.join(", "),
            row.brain_score,
            row.mean_rate
        )
        .unwrap();
    }

    md
}
