//! Published reference tables, embedded at compile time.
//!
//! The report generator can reprint the study's headline tables without any
//! model inference or brain data on disk. The numbers live in small CSV
//! files under `fixtures/` (kept as CSV so diffs against the source tables
//! stay reviewable) and are parsed once into a [`FixtureTables`] behind a
//! `OnceLock`. Parsing is hand-rolled: none of the fields contain commas,
//! and pulling in a CSV crate for nine static tables isn't worth the
//! dependency.
//!
//! Everything is validated on first load — per-region scores in [-1, 1],
//! rates in [0, 1], the two-turn identity `final ≈ turn1 + conversion`
//! within rounding tolerance, and key-set agreement across the per-model
//! tables — so a bad edit to a fixture file fails loudly in every test run.

use std::collections::BTreeMap;
use std::sync::OnceLock;

/// The six cortical region groups scores are reported over.
pub const ROI_NAMES: [&str; 6] = [
    "prf-visualrois",
    "floc-bodies",
    "floc-faces",
    "floc-places",
    "floc-words",
    "streams",
];

/// Number of misleading-claim categories in the pressure protocol.
pub const N_CATEGORIES: usize = 5;

/// Number of pressure difficulty levels.
pub const N_DIFFICULTY_LEVELS: usize = 10;

/// Human-readable names for categories 1..=5.
pub const CATEGORY_DESCRIPTIONS: [&str; N_CATEGORIES] = [
    "Object Misidentification",
    "Attribute Manipulation",
    "Existence Denial",
    "Count Falsification",
    "Authority Appeal",
];

/// Per-model visual alignment scores: the overall score and one score per
/// region group in [`ROI_NAMES`].
#[derive(Debug, Clone)]
pub struct BrainFixture {
    pub overall: f64,
    pub per_roi: BTreeMap<String, f64>,
}

/// Per-model capitulation summary from the two-turn protocol.
#[derive(Debug, Clone)]
pub struct SycophancyFixture {
    /// Fraction of trials where the model agreed with the false claim
    /// immediately, before any pressure.
    pub turn1_rate: f64,
    /// Fraction that had capitulated by the end of the second turn.
    pub final_rate: f64,
    /// Among trials that survived turn 1, the fraction flipped by pressure.
    pub pressure_conversion: f64,
}

/// The two-turn decomposition table (adds the turn-over-turn delta).
#[derive(Debug, Clone)]
pub struct TwoTurnFixture {
    pub turn1_rate: f64,
    pub pressure_conversion: f64,
    pub final_rate: f64,
    pub delta: f64,
}

/// Per-model resistance-curve summary.
#[derive(Debug, Clone)]
pub struct ResistanceFixture {
    /// Area under the resistance curve across difficulty levels, in [0, 1].
    pub aurc: f64,
    /// Per-level slope of capitulation rate against difficulty.
    pub slope: f64,
    /// First difficulty level at which resistance drops below half,
    /// 11 meaning "never within the tested range".
    pub breakpoint: u8,
}

/// Capitulation statistics for one misleading-claim category.
#[derive(Debug, Clone)]
pub struct CategoryFixture {
    pub category: u8,
    pub description: String,
    pub mean_rate: f64,
    pub std: f64,
    pub r_vs_alignment: f64,
    pub p: f64,
}

/// One row of the pressure-tactic effectiveness ranking.
#[derive(Debug, Clone)]
pub struct TacticFixture {
    pub rank: u32,
    pub tactic: String,
    pub mean_rate: f64,
    pub std: f64,
}

/// Capitulation statistics for one difficulty level.
#[derive(Debug, Clone)]
pub struct DifficultyFixture {
    pub level: u8,
    pub mean_rate: f64,
    pub r_vs_alignment: f64,
    pub p: f64,
}

/// Vision-encoder family roll-up.
#[derive(Debug, Clone)]
pub struct ArchitectureFixture {
    pub family: String,
    pub models: Vec<String>,
    pub brain_score: f64,
    pub mean_rate: f64,
}

/// Identity and provenance of one evaluated model.
#[derive(Debug, Clone)]
pub struct ModelCatalogEntry {
    pub model: String,
    pub params: String,
    pub encoder_family: String,
    pub checkpoint_id: String,
}

/// All embedded reference tables, keyed consistently by model name.
#[derive(Debug, Clone)]
pub struct FixtureTables {
    /// Models in headline-table order (ascending final capitulation rate).
    pub model_order: Vec<String>,
    pub brain: BTreeMap<String, BrainFixture>,
    pub sycophancy: BTreeMap<String, SycophancyFixture>,
    pub two_turn: BTreeMap<String, TwoTurnFixture>,
    pub resistance: BTreeMap<String, ResistanceFixture>,
    /// Region-by-category correlation grid, rows in published order.
    pub cross_category: Vec<(String, [f64; N_CATEGORIES])>,
    pub category_rates: Vec<CategoryFixture>,
    /// Published head and tail of the tactic ranking (15 of 65 rows).
    pub tactic_ranking: Vec<TacticFixture>,
    pub difficulty_levels: Vec<DifficultyFixture>,
    pub architecture_families: Vec<ArchitectureFixture>,
    pub model_catalog: Vec<ModelCatalogEntry>,
}

impl FixtureTables {
    /// Alignment scores and final capitulation rates as parallel vectors in
    /// `model_order`, the shape every correlation routine wants.
    pub fn aligned_series(&self, roi: Option<&str>) -> (Vec<f64>, Vec<f64>) {
        let mut scores = Vec::with_capacity(self.model_order.len());
        let mut rates = Vec::with_capacity(self.model_order.len());
        for name in &self.model_order {
            let b = &self.brain[name];
            scores.push(match roi {
                Some(r) => b.per_roi[r],
                None => b.overall,
            });
            rates.push(self.sycophancy[name].final_rate);
        }
        (scores, rates)
    }
}

const MODEL_SCORES_CSV: &str = include_str!("../../fixtures/model_scores.csv");
const TWO_TURN_CSV: &str = include_str!("../../fixtures/two_turn.csv");
const RESISTANCE_CSV: &str = include_str!("../../fixtures/resistance_curves.csv");
const CROSS_CATEGORY_CSV: &str = include_str!("../../fixtures/cross_category.csv");
const CATEGORY_RATES_CSV: &str = include_str!("../../fixtures/category_rates.csv");
const TACTIC_RANKING_CSV: &str = include_str!("../../fixtures/tactic_ranking.csv");
const DIFFICULTY_CSV: &str = include_str!("../../fixtures/difficulty_levels.csv");
const ARCHITECTURE_CSV: &str = include_str!("../../fixtures/architecture_families.csv");
const MODEL_CATALOG_CSV: &str = include_str!("../../fixtures/model_catalog.csv");

/// Tolerance for `final ≈ turn1 + conversion` under three-decimal rounding.
const TWO_TURN_IDENTITY_TOL: f64 = 0.005;

/// Access the embedded reference tables, parsing and validating them on
/// first use. The data is compiled in, so a failure here is a build defect
/// and panics rather than returning an error.
pub fn load_fixture_tables() -> &'static FixtureTables {
    static TABLES: OnceLock<FixtureTables> = OnceLock::new();
    TABLES.get_or_init(|| parse_all().expect("embedded fixture tables must be valid"))
}

/// Split one CSV body into rows of fields. No field in these tables
/// contains a comma, quote, or newline, so a plain split is exact.
fn csv_rows(body: &'static str) -> Vec<Vec<&'static str>> {
    body.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(str::trim).collect())
        .collect()
}

fn field_f64(row: &[&str], idx: usize, table: &str) -> Result<f64, String> {
    row.get(idx)
        .ok_or_else(|| format!("{table}: row too short, wanted field {idx}"))?
        .parse::<f64>()
        .map_err(|e| format!("{table}: bad float in field {idx}: {e}"))
}

fn check_unit(v: f64, what: &str) -> Result<(), String> {
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{what} = {v} outside [0, 1]"));
    }
    Ok(())
}

fn check_corr(v: f64, what: &str) -> Result<(), String> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(format!("{what} = {v} outside [-1, 1]"));
    }
    Ok(())
}

fn parse_all() -> Result<FixtureTables, String> {
    // model_scores.csv: model, overall, six region columns, three rates.
    let mut model_order = Vec::new();
    let mut brain = BTreeMap::new();
    let mut sycophancy = BTreeMap::new();
    for row in csv_rows(MODEL_SCORES_CSV) {
        let name = row[0].to_string();
        let overall = field_f64(&row, 1, "model_scores")?;
        check_corr(overall, &format!("{name} overall"))?;
        let mut per_roi = BTreeMap::new();
        for (i, roi) in ROI_NAMES.iter().enumerate() {
            let v = field_f64(&row, 2 + i, "model_scores")?;
            check_corr(v, &format!("{name} {roi}"))?;
            per_roi.insert(roi.to_string(), v);
        }
        let turn1_rate = field_f64(&row, 8, "model_scores")?;
        let final_rate = field_f64(&row, 9, "model_scores")?;
        let pressure_conversion = field_f64(&row, 10, "model_scores")?;
        for (v, what) in [
            (turn1_rate, "turn1_rate"),
            (final_rate, "final_rate"),
            (pressure_conversion, "pressure_conversion"),
        ] {
            check_unit(v, &format!("{name} {what}"))?;
        }
        model_order.push(name.clone());
        brain.insert(name.clone(), BrainFixture { overall, per_roi });
        sycophancy.insert(
            name,
            SycophancyFixture {
                turn1_rate,
                final_rate,
                pressure_conversion,
            },
        );
    }
    if model_order.len() != 12 {
        return Err(format!("model_scores: expected 12 models, got {}", model_order.len()));
    }

    let mut two_turn = BTreeMap::new();
    for row in csv_rows(TWO_TURN_CSV) {
        let name = row[0].to_string();
        let t = TwoTurnFixture {
            turn1_rate: field_f64(&row, 1, "two_turn")?,
            pressure_conversion: field_f64(&row, 2, "two_turn")?,
            final_rate: field_f64(&row, 3, "two_turn")?,
            delta: field_f64(&row, 4, "two_turn")?,
        };
        // Final rate decomposes as turn1 + (1 - turn1) * conversion; the
        // published numbers satisfy it to rounding precision.
        let reconstructed = t.turn1_rate + (1.0 - t.turn1_rate) * t.pressure_conversion;
        if (reconstructed - t.final_rate).abs() > TWO_TURN_IDENTITY_TOL {
            return Err(format!(
                "two_turn: {name} violates the decomposition identity: \
                 {} + (1 - {}) * {} = {reconstructed} vs final {}",
                t.turn1_rate, t.turn1_rate, t.pressure_conversion, t.final_rate
            ));
        }
        two_turn.insert(name, t);
    }

    let mut resistance = BTreeMap::new();
    for row in csv_rows(RESISTANCE_CSV) {
        let name = row[0].to_string();
        let aurc = field_f64(&row, 1, "resistance_curves")?;
        check_unit(aurc, &format!("{name} aurc"))?;
        let slope = field_f64(&row, 2, "resistance_curves")?;
        let breakpoint = row[3]
            .parse::<u8>()
            .map_err(|e| format!("resistance_curves: bad breakpoint: {e}"))?;
        if !(1..=11).contains(&breakpoint) {
            return Err(format!("{name} breakpoint {breakpoint} outside 1..=11"));
        }
        resistance.insert(name, ResistanceFixture { aurc, slope, breakpoint });
    }

    let mut cross_category = Vec::new();
    for row in csv_rows(CROSS_CATEGORY_CSV) {
        let roi = row[0].to_string();
        if !ROI_NAMES.contains(&roi.as_str()) {
            return Err(format!("cross_category: unknown region {roi:?}"));
        }
        let mut vals = [0.0; N_CATEGORIES];
        for (c, slot) in vals.iter_mut().enumerate() {
            *slot = field_f64(&row, 1 + c, "cross_category")?;
            check_corr(*slot, &format!("cross_category {roi} cat{}", c + 1))?;
        }
        cross_category.push((roi, vals));
    }
    if cross_category.len() != ROI_NAMES.len() {
        return Err(format!(
            "cross_category: expected {} rows, got {}",
            ROI_NAMES.len(),
            cross_category.len()
        ));
    }

    let mut category_rates = Vec::new();
    for row in csv_rows(CATEGORY_RATES_CSV) {
        let category = row[0]
            .parse::<u8>()
            .map_err(|e| format!("category_rates: bad category: {e}"))?;
        let f = CategoryFixture {
            category,
            description: row[1].to_string(),
            mean_rate: field_f64(&row, 2, "category_rates")?,
            std: field_f64(&row, 3, "category_rates")?,
            r_vs_alignment: field_f64(&row, 4, "category_rates")?,
            p: field_f64(&row, 5, "category_rates")?,
        };
        check_unit(f.mean_rate, "category mean_rate")?;
        check_corr(f.r_vs_alignment, "category r")?;
        check_unit(f.p, "category p")?;
        category_rates.push(f);
    }
    if category_rates.len() != N_CATEGORIES {
        return Err(format!(
            "category_rates: expected {N_CATEGORIES} rows, got {}",
            category_rates.len()
        ));
    }
    for (i, f) in category_rates.iter().enumerate() {
        if f.category as usize != i + 1 {
            return Err(format!("category_rates: row {i} has category {}", f.category));
        }
        if f.description != CATEGORY_DESCRIPTIONS[i] {
            return Err(format!(
                "category_rates: description {:?} does not match {:?}",
                f.description, CATEGORY_DESCRIPTIONS[i]
            ));
        }
    }

    let mut tactic_ranking = Vec::new();
    for row in csv_rows(TACTIC_RANKING_CSV) {
        let f = TacticFixture {
            rank: row[0]
                .parse::<u32>()
                .map_err(|e| format!("tactic_ranking: bad rank: {e}"))?,
            tactic: row[1].to_string(),
            mean_rate: field_f64(&row, 2, "tactic_ranking")?,
            std: field_f64(&row, 3, "tactic_ranking")?,
        };
        check_unit(f.mean_rate, "tactic mean_rate")?;
        tactic_ranking.push(f);
    }
    if tactic_ranking.len() != 15 {
        return Err(format!(
            "tactic_ranking: expected the 15 published rows, got {}",
            tactic_ranking.len()
        ));
    }

    let mut difficulty_levels = Vec::new();
    for row in csv_rows(DIFFICULTY_CSV) {
        let f = DifficultyFixture {
            level: row[0]
                .parse::<u8>()
                .map_err(|e| format!("difficulty_levels: bad level: {e}"))?,
            mean_rate: field_f64(&row, 1, "difficulty_levels")?,
            r_vs_alignment: field_f64(&row, 2, "difficulty_levels")?,
            p: field_f64(&row, 3, "difficulty_levels")?,
        };
        check_unit(f.mean_rate, "difficulty mean_rate")?;
        difficulty_levels.push(f);
    }
    if difficulty_levels.len() != N_DIFFICULTY_LEVELS {
        return Err(format!(
            "difficulty_levels: expected {N_DIFFICULTY_LEVELS} rows, got {}",
            difficulty_levels.len()
        ));
    }

    let mut architecture_families = Vec::new();
    for row in csv_rows(ARCHITECTURE_CSV) {
        let f = ArchitectureFixture {
            family: row[0].to_string(),
            models: row[1].split(';').map(|s| s.trim().to_string()).collect(),
            brain_score: field_f64(&row, 2, "architecture_families")?,
            mean_rate: field_f64(&row, 3, "architecture_families")?,
        };
        check_unit(f.mean_rate, "architecture mean_rate")?;
        architecture_families.push(f);
    }

    let mut model_catalog = Vec::new();
    for row in csv_rows(MODEL_CATALOG_CSV) {
        model_catalog.push(ModelCatalogEntry {
            model: row[0].to_string(),
            params: row[1].to_string(),
            encoder_family: row[2].to_string(),
            checkpoint_id: row[3].to_string(),
        });
    }

    // Cross-table key consistency: every per-model table covers exactly the
    // same 12 models, and the family roll-up references only known names.
    for (table, keys) in [
        ("two_turn", two_turn.keys().cloned().collect::<Vec<_>>()),
        ("resistance_curves", resistance.keys().cloned().collect()),
        ("model_catalog", model_catalog.iter().map(|m| m.model.clone()).collect()),
    ] {
        let mut sorted = model_order.clone();
        sorted.sort();
        let mut got = keys;
        got.sort();
        if got != sorted {
            return Err(format!("{table}: model set differs from model_scores"));
        }
    }
    for fam in &architecture_families {
        for m in &fam.models {
            if !brain.contains_key(m) {
                return Err(format!(
                    "architecture_families: {:?} references unknown model {m:?}",
                    fam.family
                ));
            }
        }
    }
    // The summary table and the decomposition table must agree on the rates
    // they share (the summary stores turn1 at higher precision for one
    // model; both files carry the same value).
    for name in &model_order {
        let s = &sycophancy[name];
        let t = &two_turn[name];
        for (a, b, what) in [
            (s.turn1_rate, t.turn1_rate, "turn1_rate"),
            (s.final_rate, t.final_rate, "final_rate"),
            (s.pressure_conversion, t.pressure_conversion, "pressure_conversion"),
        ] {
            if (a - b).abs() > 1e-12 {
                return Err(format!("{name}: {what} differs between tables ({a} vs {b})"));
            }
        }
    }

    Ok(FixtureTables {
        model_order,
        brain,
        sycophancy,
        two_turn,
        resistance,
        cross_category,
        category_rates,
        tactic_ranking,
        difficulty_levels,
        architecture_families,
        model_catalog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_load_and_cover_twelve_models() {
        let t = load_fixture_tables();
        assert_eq!(t.model_order.len(), 12);
        assert_eq!(t.brain.len(), 12);
        assert_eq!(t.sycophancy.len(), 12);
        assert_eq!(t.two_turn.len(), 12);
        assert_eq!(t.resistance.len(), 12);
        assert_eq!(t.model_catalog.len(), 12);
    }

    #[test]
    fn spot_values_match_the_published_tables() {
        let t = load_fixture_tables();
        assert_eq!(t.brain["SmolVLM-500M"].per_roi["prf-visualrois"], 0.350);
        assert_eq!(t.brain["Qwen2-VL-2B"].overall, 0.416);
        assert_eq!(t.brain["PaliGemma2-10B"].per_roi["floc-words"], 0.341);
        assert_eq!(t.sycophancy["SmolVLM-500M"].turn1_rate, 0.0003);
        assert_eq!(t.sycophancy["PaliGemma2-10B"].final_rate, 0.995);
        assert_eq!(t.sycophancy["Qwen2.5-VL-3B"].pressure_conversion, 0.007);
        assert_eq!(t.two_turn["Qwen2-VL-2B"].delta, 0.598);
        assert_eq!(t.resistance["SmolVLM-500M"].aurc, 0.952);
        assert_eq!(t.resistance["SmolVLM-500M"].breakpoint, 11);
        assert_eq!(t.resistance["Qwen2.5-VL-3B"].breakpoint, 11);
        assert_eq!(t.resistance["PaliGemma2-10B"].breakpoint, 1);
        assert_eq!(t.tactic_ranking[0].tactic, "Statistics");
        assert_eq!(t.tactic_ranking[0].mean_rate, 0.865);
        assert_eq!(t.tactic_ranking[14].rank, 65);
        assert_eq!(t.difficulty_levels[5].mean_rate, 0.809);
        assert_eq!(t.category_rates[2].description, "Existence Denial");
        assert_eq!(t.category_rates[2].r_vs_alignment, -0.223);
    }

    #[test]
    fn model_order_is_sorted_by_final_rate() {
        let t = load_fixture_tables();
        let rates: Vec<f64> = t
            .model_order
            .iter()
            .map(|m| t.sycophancy[m].final_rate)
            .collect();
        for w in rates.windows(2) {
            assert!(w[0] <= w[1], "headline order must be ascending final rate");
        }
    }

    #[test]
    fn two_turn_identity_holds_within_rounding() {
        let t = load_fixture_tables();
        for (name, row) in &t.two_turn {
            let reconstructed = row.turn1_rate + (1.0 - row.turn1_rate) * row.pressure_conversion;
            assert!(
                (reconstructed - row.final_rate).abs() <= TWO_TURN_IDENTITY_TOL,
                "{name}: {reconstructed} vs {}",
                row.final_rate
            );
        }
    }

    #[test]
    fn aligned_series_pairs_scores_with_rates() {
        let t = load_fixture_tables();
        let (overall, rates) = t.aligned_series(None);
        assert_eq!(overall.len(), 12);
        assert_eq!(overall[0], 0.393);
        assert_eq!(rates[0], 0.037);
        let (prf, _) = t.aligned_series(Some("prf-visualrois"));
        assert_eq!(prf[6], 0.362); // Qwen2-VL-2B is the seventh row
    }

    #[test]
    fn exactly_one_cross_category_cell_is_individually_significant() {
        // With 12 paired observations, an |r| above ~0.576 corresponds to a
        // two-tailed p below 0.05; only the primary-visual x existence-denial
        // cell clears it.
        let t = load_fixture_tables();
        let mut significant = Vec::new();
        for (roi, vals) in &t.cross_category {
            for (c, &r) in vals.iter().enumerate() {
                let p = crate::stats::p_from_r(r, 12).unwrap();
                if p < 0.05 {
                    significant.push((roi.clone(), c + 1, p));
                }
            }
        }
        assert_eq!(significant.len(), 1, "{significant:?}");
        assert_eq!(significant[0].0, "prf-visualrois");
        assert_eq!(significant[0].1, 3);
        assert!((significant[0].2 - 0.0404155).abs() < 1e-6);
    }

    #[test]
    fn architecture_families_partition_the_model_set() {
        let t = load_fixture_tables();
        let mut seen: Vec<&str> = Vec::new();
        for fam in &t.architecture_families {
            for m in &fam.models {
                seen.push(m);
            }
        }
        seen.sort();
        let mut expected: Vec<&str> = t.model_order.iter().map(String::as_str).collect();
        expected.sort();
        assert_eq!(seen, expected);
    }

    #[test]
    fn catalog_preserves_checkpoint_ids_verbatim() {
        let t = load_fixture_tables();
        let by_name: BTreeMap<&str, &ModelCatalogEntry> =
            t.model_catalog.iter().map(|m| (m.model.as_str(), m)).collect();
        assert_eq!(
            by_name["BLIP-2-OPT-2.7B"].checkpoint_id,
            "Salesforce/blip2-opt-2.7b"
        );
        // Recorded exactly as published, including the 8B row pointing at a
        // 450M checkpoint.
        assert_eq!(by_name["LFM-2-VL-8B"].checkpoint_id, "LiquidAI/LFM2-VL-450M");
    }
}
