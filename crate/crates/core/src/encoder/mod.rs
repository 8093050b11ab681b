//! Voxelwise encoding of brain responses from model features.
//!
//! This is stage one of the pipeline: token-level features are mean-pooled
//! into one vector per stimulus, a seeded 80/20 split carves out held-out
//! stimuli, ridge regression with 5-fold cross-validated regularization maps
//! features to voxel responses, and held-out predictions are scored by
//! per-voxel Pearson correlation. Region scores average the masked voxels,
//! subject scores average all voxels, and both are averaged over subjects
//! into a [`BrainScoreCard`].
//!
//! Numerical policy: matrices are stored as `f32` (that is the on-disk
//! format) but every accumulation, gram matrix, and solve runs in `f64` —
//! the conditioning of XᵀX demands it. Solves use a hand-rolled Cholesky
//! factorization; with a positive ridge penalty the system is symmetric
//! positive-definite by construction, and the primal (D×D) or dual (N×N)
//! formulation is chosen by whichever is smaller.
//!
//! Everything stochastic (the outer split, fold assignment) draws from
//! [`SplitMix64`] substreams, so a fit is a pure function of its inputs and
//! the integer seed.

use crate::dataio::BrainScoreCard;
use crate::rng::SplitMix64;
use ndarray::{Array2, Axis};
use std::collections::BTreeMap;
use thiserror::Error;

/// Substream tag for the outer train/test split shuffle.
const TAG_SPLIT: u64 = 0x7370_6c74; // "splt"
/// Substream tag for cross-validation fold assignment.
const TAG_CV_FOLDS: u64 = 0x6376_666f; // "cvfo"

/// Regularization strengths searched during cross-validation.
pub const DEFAULT_ALPHA_GRID: [f64; 6] = [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0];
/// Cross-validation folds used to pick the regularization strength.
pub const DEFAULT_K_FOLDS: usize = 5;
/// Fraction of stimuli held out for scoring.
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid input: {what}")]
    InvalidInput { what: String },
    #[error("non-finite value in {what}")]
    NonFiniteInput { what: String },
    #[error("shape mismatch: {what}")]
    ShapeMismatch { what: String },
    /// The regularized gram matrix failed Cholesky factorization. With a
    /// positive penalty this indicates non-finite inputs slipped through,
    /// not a genuinely singular system.
    #[error("system is not positive definite (pivot {pivot:e} at column {col})")]
    SingularSystem { col: usize, pivot: f64 },
    /// A region had an empty (or absent) voxel mask for every subject, so
    /// its score would be an average of nothing.
    #[error("region {roi:?} has no voxels for any subject")]
    EmptyRoi { roi: String },
}

/// Token-level features for one stimulus: `n_tokens` rows of `n_features`.
#[derive(Debug, Clone)]
pub struct TokenFeatureStack {
    pub n_tokens: usize,
    pub n_features: usize,
    values: Array2<f32>,
}

impl TokenFeatureStack {
    pub fn new(values: Array2<f32>) -> Result<Self, EncoderError> {
        let (t, d) = values.dim();
        if t == 0 || d == 0 {
            return Err(EncoderError::InvalidInput {
                what: format!("token stack must be non-empty, got {t}x{d}"),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFiniteInput {
                what: "token stack".into(),
            });
        }
        Ok(Self {
            n_tokens: t,
            n_features: d,
            values,
        })
    }

    pub fn values(&self) -> &Array2<f32> {
        &self.values
    }
}

/// Mean-pool a token stack across the token dimension into one feature
/// vector. Sums run in `f64` so long stacks do not lose low-order bits;
/// the result is emitted in the storage precision.
pub fn pool_tokens(stack: &TokenFeatureStack) -> Vec<f32> {
    let t = stack.n_tokens as f64;
    (0..stack.n_features)
        .map(|d| {
            let sum: f64 = stack.values.column(d).iter().map(|&v| v as f64).sum();
            (sum / t) as f32
        })
        .collect()
}

/// Deterministically split `0..n` into train and test index lists.
///
/// The indices are shuffled by a seeded Fisher–Yates pass and the last
/// `round(test_fraction · n)` shuffled positions become the test set, so the
/// same `(n, test_fraction, seed)` always yields the same split.
pub fn split_train_test(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EncoderError> {
    if n < 5 {
        return Err(EncoderError::InvalidInput {
            what: format!("need at least 5 stimuli to split, got {n}"),
        });
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EncoderError::InvalidInput {
            what: format!("test_fraction must be in (0, 1), got {test_fraction}"),
        });
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 {
        return Err(EncoderError::InvalidInput {
            what: format!("{n} stimuli at fraction {test_fraction} round to an empty test set"),
        });
    }
    if n_test >= n {
        return Err(EncoderError::InvalidInput {
            what: format!("{n} stimuli at fraction {test_fraction} leave an empty train set"),
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    SplitMix64::substream(seed, TAG_SPLIT, 0).shuffle(&mut idx);
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

/// A fitted ridge map from features to voxels.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    /// D×V weight matrix, in solve precision.
    pub weights: Array2<f64>,
    /// The selected regularization strength.
    pub alpha: f64,
    /// Outer-split stimulus indices this fit was trained on. Filled by the
    /// alignment pipeline; empty when the caller fit on pre-split data.
    pub train_indices: Vec<usize>,
    /// Held-out stimulus indices reserved for scoring (see above).
    pub test_indices: Vec<usize>,
    /// `(alpha, mean out-of-fold R²)` for every grid point, in grid order.
    pub cv_scores: Vec<(f64, f64)>,
}

impl RidgeFit {
    /// Check structural invariants. `n_stimuli`/`test_fraction` describe the
    /// outer split recorded in `train_indices`/`test_indices`; the check is
    /// skipped when the fit carries no split (both lists empty).
    pub fn validate(&self, n_stimuli: usize, test_fraction: f64) -> Result<(), EncoderError> {
        if !self.cv_scores.iter().any(|&(a, _)| a == self.alpha) {
            return Err(EncoderError::InvalidInput {
                what: format!("selected alpha {} is not in the searched grid", self.alpha),
            });
        }
        if self.train_indices.is_empty() && self.test_indices.is_empty() {
            return Ok(());
        }
        let expected_test = (test_fraction * n_stimuli as f64).round() as usize;
        if self.test_indices.len() != expected_test {
            return Err(EncoderError::InvalidInput {
                what: format!(
                    "test set has {} indices, expected round({test_fraction}·{n_stimuli}) = {expected_test}",
                    self.test_indices.len()
                ),
            });
        }
        let mut seen = vec![false; n_stimuli];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n_stimuli || seen[i] {
                return Err(EncoderError::InvalidInput {
                    what: format!("split indices must partition 0..{n_stimuli} (offender: {i})"),
                });
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(EncoderError::InvalidInput {
                what: format!("split does not cover all {n_stimuli} stimuli"),
            });
        }
        Ok(())
    }
}

fn to_f64(m: &Array2<f32>) -> Array2<f64> {
    m.mapv(|v| v as f64)
}

fn check_finite(name: &str, m: &Array2<f32>) -> Result<(), EncoderError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::NonFiniteInput { what: name.into() });
    }
    Ok(())
}

/// Solve `A·X = B` for symmetric positive-definite `A` via an in-place
/// Cholesky factorization (`A = L·Lᵀ`), multiple right-hand sides at once.
fn spd_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>, EncoderError> {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), n);
    debug_assert_eq!(b.nrows(), n);

    let mut l = a.clone();
    for j in 0..n {
        let mut d = l[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(EncoderError::SingularSystem { col: j, pivot: d });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = l[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }

    let mut x = b.clone();
    let rhs = x.ncols();
    // Forward pass: L·Y = B.
    for i in 0..n {
        for c in 0..rhs {
            let mut s = x[[i, c]];
            for k in 0..i {
                s -= l[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = s / l[[i, i]];
        }
    }
    // Back pass: Lᵀ·X = Y.
    for i in (0..n).rev() {
        for c in 0..rhs {
            let mut s = x[[i, c]];
            for k in (i + 1)..n {
                s -= l[[k, i]] * x[[k, c]];
            }
            x[[i, c]] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Ridge weights via the primal normal equations: `(XᵀX + αI)W = XᵀY`.
fn ridge_primal(xf: &Array2<f64>, yf: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, EncoderError> {
    let d = xf.ncols();
    let mut gram = xf.t().dot(xf);
    for i in 0..d {
        gram[[i, i]] += alpha;
    }
    spd_solve(&gram, &xf.t().dot(yf))
}

/// Ridge weights via the dual: `W = Xᵀ(XXᵀ + αI)⁻¹Y`. Equivalent to the
/// primal solution but factors an N×N system, which wins when D > N.
fn ridge_dual(xf: &Array2<f64>, yf: &Array2<f64>, alpha: f64) -> Result<Array2<f64>, EncoderError> {
    let n = xf.nrows();
    let mut gram = xf.dot(&xf.t());
    for i in 0..n {
        gram[[i, i]] += alpha;
    }
    let coef = spd_solve(&gram, yf)?;
    Ok(xf.t().dot(&coef))
}

fn ridge_weights_f64(
    xf: &Array2<f64>,
    yf: &Array2<f64>,
    alpha: f64,
) -> Result<Array2<f64>, EncoderError> {
    if xf.ncols() <= xf.nrows() {
        ridge_primal(xf, yf, alpha)
    } else {
        ridge_dual(xf, yf, alpha)
    }
}

/// Fit ridge weights at one fixed regularization strength (no grid search).
/// Solves in `f64`, choosing the primal or dual formulation by shape.
pub fn fit_ridge(
    x: &Array2<f32>,
    y: &Array2<f32>,
    alpha: f64,
) -> Result<Array2<f64>, EncoderError> {
    if x.nrows() != y.nrows() {
        return Err(EncoderError::ShapeMismatch {
            what: format!("features have {} rows, responses {}", x.nrows(), y.nrows()),
        });
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(EncoderError::InvalidInput {
            what: format!("alpha must be finite and positive, got {alpha}"),
        });
    }
    check_finite("features", x)?;
    check_finite("responses", y)?;
    ridge_weights_f64(&to_f64(x), &to_f64(y), alpha)
}

/// Mean per-voxel R² of `pred` against `truth`, each voxel scored against
/// the mean of its own true values. A voxel whose true values are constant
/// contributes 1 on an exact match and 0 otherwise, keeping the average
/// defined.
fn mean_r2(pred: &Array2<f64>, truth: &Array2<f64>) -> f64 {
    let n = truth.nrows() as f64;
    let v = truth.ncols();
    let mut acc = 0.0;
    for j in 0..v {
        let col = truth.column(j);
        let mean = col.sum() / n;
        let mut ss_tot = 0.0;
        let mut ss_res = 0.0;
        for i in 0..truth.nrows() {
            let d = col[i] - mean;
            ss_tot += d * d;
            let e = pred[[i, j]] - col[i];
            ss_res += e * e;
        }
        acc += if ss_tot == 0.0 {
            if ss_res == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            1.0 - ss_res / ss_tot
        };
    }
    acc / v as f64
}

/// Fit ridge regression with k-fold cross-validated selection of the
/// regularization strength.
///
/// Fold assignment shuffles the training rows under a substream of `seed`
/// and cuts the shuffled order into `k_folds` near-equal contiguous chunks.
/// Each grid point is scored by mean out-of-fold R² (per voxel, then
/// averaged over voxels and folds); the best score wins and ties go to the
/// smallest alpha (less bias). The returned weights are refit on all rows.
pub fn fit_ridge_cv(
    x: &Array2<f32>,
    y: &Array2<f32>,
    alpha_grid: &[f64],
    k_folds: usize,
    seed: u64,
) -> Result<RidgeFit, EncoderError> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(EncoderError::ShapeMismatch {
            what: format!("features have {} rows, responses {}", x.nrows(), y.nrows()),
        });
    }
    if k_folds < 2 {
        return Err(EncoderError::InvalidInput {
            what: format!("need at least 2 folds, got {k_folds}"),
        });
    }
    if n < k_folds {
        return Err(EncoderError::InvalidInput {
            what: format!("cannot cut {n} rows into {k_folds} folds"),
        });
    }
    if alpha_grid.is_empty() {
        return Err(EncoderError::InvalidInput {
            what: "alpha grid is empty".into(),
        });
    }
    if let Some(&bad) = alpha_grid.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(EncoderError::InvalidInput {
            what: format!("alpha grid entries must be finite and positive, got {bad}"),
        });
    }
    check_finite("features", x)?;
    check_finite("responses", y)?;

    let xf = to_f64(x);
    let yf = to_f64(y);

    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::substream(seed, TAG_CV_FOLDS, 0).shuffle(&mut order);
    let base = n / k_folds;
    let extra = n % k_folds;

    let mut scores = vec![0.0f64; alpha_grid.len()];
    let mut start = 0usize;
    for f in 0..k_folds {
        let len = base + usize::from(f < extra);
        let holdout = &order[start..start + len];
        let kept: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        start += len;

        let x_tr = xf.select(Axis(0), &kept);
        let y_tr = yf.select(Axis(0), &kept);
        let x_ho = xf.select(Axis(0), holdout);
        let y_ho = yf.select(Axis(0), holdout);

        // The gram matrix is shared across the grid; only the ridge on its
        // diagonal changes, so build it once per fold.
        let primal = x_tr.ncols() <= x_tr.nrows();
        let gram = if primal {
            x_tr.t().dot(&x_tr)
        } else {
            x_tr.dot(&x_tr.t())
        };
        let xty = if primal { Some(x_tr.t().dot(&y_tr)) } else { None };

        for (ai, &alpha) in alpha_grid.iter().enumerate() {
            let mut g = gram.clone();
            for i in 0..g.nrows() {
                g[[i, i]] += alpha;
            }
            let w = if primal {
                spd_solve(&g, xty.as_ref().expect("primal path"))?
            } else {
                x_tr.t().dot(&spd_solve(&g, &y_tr)?)
            };
            scores[ai] += mean_r2(&x_ho.dot(&w), &y_ho);
        }
    }
    for s in &mut scores {
        *s /= k_folds as f64;
    }

    let mut best = 0usize;
    for i in 1..alpha_grid.len() {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && alpha_grid[i] < alpha_grid[best]);
        if better {
            best = i;
        }
    }
    let alpha = alpha_grid[best];

    Ok(RidgeFit {
        weights: ridge_weights_f64(&xf, &yf, alpha)?,
        alpha,
        train_indices: Vec::new(),
        test_indices: Vec::new(),
        cv_scores: alpha_grid.iter().copied().zip(scores).collect(),
    })
}

/// Predict voxel responses for held-out stimuli: `X_test · W`.
pub fn predict(fit: &RidgeFit, x_test: &Array2<f32>) -> Result<Array2<f64>, EncoderError> {
    if x_test.ncols() != fit.weights.nrows() {
        return Err(EncoderError::ShapeMismatch {
            what: format!(
                "test features have {} columns but the fit expects {}",
                x_test.ncols(),
                fit.weights.nrows()
            ),
        });
    }
    check_finite("test features", x_test)?;
    Ok(to_f64(x_test).dot(&fit.weights))
}

/// Per-voxel correlations between predicted and recorded responses.
#[derive(Debug, Clone)]
pub struct VoxelCorrelations {
    pub r: Vec<f64>,
    /// True where either column had zero variance; `r` is recorded as 0
    /// there so downstream averages stay defined.
    pub degenerate: Vec<bool>,
}

/// Pearson correlation per voxel (column) between predictions and truth.
pub fn voxelwise_pearson(
    y_pred: &Array2<f64>,
    y_true: &Array2<f32>,
) -> Result<VoxelCorrelations, EncoderError> {
    if y_pred.dim() != y_true.dim() {
        return Err(EncoderError::ShapeMismatch {
            what: format!(
                "predictions are {:?}, truth is {:?}",
                y_pred.dim(),
                y_true.dim()
            ),
        });
    }
    let (n, v) = y_pred.dim();
    if n < 3 {
        return Err(EncoderError::InvalidInput {
            what: format!("need at least 3 test rows to correlate, got {n}"),
        });
    }
    let nf = n as f64;
    let mut r = Vec::with_capacity(v);
    let mut degenerate = Vec::with_capacity(v);
    for j in 0..v {
        let pc = y_pred.column(j);
        let mean_p = pc.sum() / nf;
        let mean_t = y_true.column(j).iter().map(|&x| x as f64).sum::<f64>() / nf;
        let mut cov = 0.0;
        let mut var_p = 0.0;
        let mut var_t = 0.0;
        for i in 0..n {
            let dp = pc[i] - mean_p;
            let dt = y_true[[i, j]] as f64 - mean_t;
            cov += dp * dt;
            var_p += dp * dp;
            var_t += dt * dt;
        }
        if var_p == 0.0 || var_t == 0.0 {
            r.push(0.0);
            degenerate.push(true);
        } else {
            r.push((cov / (var_p.sqrt() * var_t.sqrt())).clamp(-1.0, 1.0));
            degenerate.push(false);
        }
    }
    Ok(VoxelCorrelations { r, degenerate })
}

/// Aggregate per-subject voxel correlations into a [`BrainScoreCard`].
///
/// Region scores average each subject's masked voxels, then average those
/// subject means (uniform subject weighting). The overall score does the
/// same over all voxels. A subject with an empty or absent mask for some
/// region is left out of that region's average; a region empty for every
/// subject is an error. `selected_alphas` is left empty — the fitting
/// pipeline fills it.
pub fn score_model(
    model_id: &str,
    per_voxel_r: &BTreeMap<String, Vec<f64>>,
    roi_masks: &BTreeMap<String, BTreeMap<String, Vec<u32>>>,
) -> Result<BrainScoreCard, EncoderError> {
    if per_voxel_r.is_empty() {
        return Err(EncoderError::InvalidInput {
            what: "no subjects to score".into(),
        });
    }
    for subject in per_voxel_r.keys() {
        if !roi_masks.contains_key(subject) {
            return Err(EncoderError::InvalidInput {
                what: format!("subject {subject:?} has voxel scores but no mask table"),
            });
        }
    }
    for subject in roi_masks.keys() {
        if !per_voxel_r.contains_key(subject) {
            return Err(EncoderError::InvalidInput {
                what: format!("subject {subject:?} has a mask table but no voxel scores"),
            });
        }
    }

    let mut per_subject_overall = BTreeMap::new();
    let mut per_subject_per_roi: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut roi_names: Vec<&String> = Vec::new();
    for masks in roi_masks.values() {
        for name in masks.keys() {
            if !roi_names.contains(&name) {
                roi_names.push(name);
            }
        }
    }

    for (subject, r) in per_voxel_r {
        if r.is_empty() {
            return Err(EncoderError::InvalidInput {
                what: format!("subject {subject:?} has an empty voxel score vector"),
            });
        }
        per_subject_overall.insert(
            subject.clone(),
            r.iter().sum::<f64>() / r.len() as f64,
        );
        let masks = &roi_masks[subject];
        let mut by_roi = BTreeMap::new();
        for (roi, idx) in masks {
            if idx.is_empty() {
                continue;
            }
            let mut sum = 0.0;
            for &i in idx {
                let i = i as usize;
                if i >= r.len() {
                    return Err(EncoderError::InvalidInput {
                        what: format!(
                            "subject {subject:?} region {roi:?} mask index {i} exceeds {} voxels",
                            r.len()
                        ),
                    });
                }
                sum += r[i];
            }
            by_roi.insert(roi.clone(), sum / idx.len() as f64);
        }
        per_subject_per_roi.insert(subject.clone(), by_roi);
    }

    let mut per_roi = BTreeMap::new();
    for roi in roi_names {
        let vals: Vec<f64> = per_subject_per_roi
            .values()
            .filter_map(|m| m.get(roi))
            .copied()
            .collect();
        if vals.is_empty() {
            return Err(EncoderError::EmptyRoi { roi: roi.clone() });
        }
        per_roi.insert(roi.clone(), vals.iter().sum::<f64>() / vals.len() as f64);
    }

    let overall =
        per_subject_overall.values().sum::<f64>() / per_subject_overall.len() as f64;

    Ok(BrainScoreCard {
        model_id: model_id.to_string(),
        overall,
        per_roi,
        per_subject_overall,
        per_subject_per_roi,
        selected_alphas: BTreeMap::new(),
    })
}

/// One subject's recorded responses and region masks, rows aligned with the
/// feature matrix by stimulus order.
#[derive(Debug, Clone)]
pub struct SubjectData {
    pub id: String,
    pub responses: Array2<f32>,
    pub roi_masks: BTreeMap<String, Vec<u32>>,
}

/// Knobs for the full alignment run.
#[derive(Debug, Clone)]
pub struct AlignmentConfig {
    pub alpha_grid: Vec<f64>,
    pub k_folds: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            k_folds: DEFAULT_K_FOLDS,
            test_fraction: DEFAULT_TEST_FRACTION,
            seed: 0,
        }
    }
}

/// Run the full per-model alignment: split, fit, predict, correlate, and
/// aggregate across subjects.
///
/// All subjects share the same stimulus set (and therefore the same seeded
/// split). Subjects are processed in ascending id order and the reduction
/// is order-fixed, so identical inputs and seed give identical cards.
pub fn score_alignment(
    model_id: &str,
    features: &Array2<f32>,
    subjects: &[SubjectData],
    cfg: &AlignmentConfig,
) -> Result<BrainScoreCard, EncoderError> {
    if subjects.is_empty() {
        return Err(EncoderError::InvalidInput {
            what: "no subjects supplied".into(),
        });
    }
    let mut order: Vec<&SubjectData> = subjects.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in order.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(EncoderError::InvalidInput {
                what: format!("duplicate subject id {:?}", pair[0].id),
            });
        }
    }

    let n = features.nrows();
    let (train, test) = split_train_test(n, cfg.test_fraction, cfg.seed)?;
    let x_train = features.select(Axis(0), &train);
    let x_test = features.select(Axis(0), &test);

    let mut per_voxel_r = BTreeMap::new();
    let mut masks = BTreeMap::new();
    let mut alphas = BTreeMap::new();
    for subject in order {
        if subject.responses.nrows() != n {
            return Err(EncoderError::ShapeMismatch {
                what: format!(
                    "subject {:?} has {} stimulus rows but features have {n}",
                    subject.id,
                    subject.responses.nrows()
                ),
            });
        }
        let y_train = subject.responses.select(Axis(0), &train);
        let y_test = subject.responses.select(Axis(0), &test);
        let mut fit = fit_ridge_cv(&x_train, &y_train, &cfg.alpha_grid, cfg.k_folds, cfg.seed)?;
        fit.train_indices = train.clone();
        fit.test_indices = test.clone();
        let pred = predict(&fit, &x_test)?;
        let corr = voxelwise_pearson(&pred, &y_test)?;
        per_voxel_r.insert(subject.id.clone(), corr.r);
        masks.insert(subject.id.clone(), subject.roi_masks.clone());
        alphas.insert(subject.id.clone(), fit.alpha);
    }

    let mut card = score_model(model_id, &per_voxel_r, &masks)?;
    card.selected_alphas = alphas;
    Ok(card)
}
