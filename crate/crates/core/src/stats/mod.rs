//! Statistical kernels: correlation, analytic and permutation p-values,
//! BCa bootstrap intervals, leave-one-out sensitivity, group effect sizes.
//!
//! All kernels accumulate in `f64`, reject degenerate inputs with typed
//! errors (never NaN), and take explicit seeds wherever randomness is
//! involved. Resampling procedures derive one [`crate::rng::SplitMix64`]
//! substream per replicate, so their results do not depend on evaluation
//! order or worker count.

pub mod special;

use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use special::{inc_beta_reg, ln_gamma, norm_cdf, norm_ppf, t_cdf};

/// Substream tags (arbitrary distinct constants, spelled as ASCII).
const TAG_PERMUTATION: u64 = 0x7065_726d; // "perm"
const TAG_BOOTSTRAP: u64 = 0x626f_6f74; // "boot"

/// Bounded retries for degenerate bootstrap draws before giving up.
const MAX_RESAMPLE_RETRIES: usize = 100;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("input slices have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("statistic undefined: {which} input is constant")]
    ConstantInput { which: &'static str },
    #[error("inputs must be finite")]
    NonFiniteInput,
    #[error("{what} failed to converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: &'static str },
    #[error("degenerate variance: zero spread with unequal means")]
    DegenerateVariance,
    #[error("bootstrap drew {attempts} consecutive degenerate resamples; giving up")]
    ResampleRetriesExhausted { attempts: usize },
}

fn check_paired(x: &[f64], y: &[f64], min_n: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < min_n {
        return Err(StatsError::TooFewPoints {
            needed: min_n,
            got: x.len(),
        });
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    Ok(())
}

/// Pearson correlation coefficient.
///
/// Two-pass centered accumulation; the result is clamped to [-1, 1] to
/// absorb last-ulp rounding overshoot. Constant inputs are an error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_paired(x, y, 3)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantInput { which: "x" });
    }
    if syy == 0.0 {
        return Err(StatsError::ConstantInput { which: "y" });
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks with ties assigned the average of the ranks they span (1-based).
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite inputs"));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // Positions i..=j share the same value; average their 1-based ranks.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_paired(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-tailed analytic p-value for a Pearson correlation of `n` points,
/// via the exact t transform t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of
/// freedom. `r = ±1` maps to `p = 0` exactly.
pub fn p_from_r(r: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: n });
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(StatsError::InvalidParameter {
            what: "correlation must lie in [-1, 1]",
        });
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok(2.0 * (1.0 - t_cdf(t.abs(), df)?))
}

/// Result of a one-tailed permutation test against H1: r < 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PermutationTest {
    pub r_observed: f64,
    /// Smoothed one-tailed p: (#{r_perm <= r_obs} + 1) / (n_perm + 1).
    pub p_one_tailed_negative: f64,
    pub n_permutations: usize,
    pub seed: u64,
}

/// One-tailed permutation test for a negative Pearson correlation.
///
/// Permutation `k` shuffles a fresh copy of `y` with the substream
/// `(seed, "perm", k)`; the p-value uses add-one smoothing so it can never
/// be exactly zero.
pub fn perm_test_negative(
    x: &[f64],
    y: &[f64],
    n_perm: usize,
    seed: u64,
) -> Result<PermutationTest, StatsError> {
    if n_perm < 1000 {
        return Err(StatsError::InvalidParameter {
            what: "permutation test requires n_perm >= 1000",
        });
    }
    let r_obs = pearson(x, y)?;
    let mut count = 0usize;
    for k in 0..n_perm {
        let mut rng = SplitMix64::substream(seed, TAG_PERMUTATION, k as u64);
        let mut yp = y.to_vec();
        rng.shuffle(&mut yp);
        // x non-constant and the multiset of y is unchanged, so pearson
        // cannot hit the constant-input error here.
        let r = pearson(x, &yp)?;
        if r <= r_obs {
            count += 1;
        }
    }
    Ok(PermutationTest {
        r_observed: r_obs,
        p_one_tailed_negative: (count + 1) as f64 / (n_perm + 1) as f64,
        n_permutations: n_perm,
        seed,
    })
}

/// Bias-corrected and accelerated bootstrap confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BcaInterval {
    pub low: f64,
    pub high: f64,
    /// Nominal coverage, e.g. 0.95.
    pub level: f64,
    /// Bias-correction constant (normal quantile of the fraction of
    /// replicates below the point estimate, ties at half weight).
    pub z0: f64,
    /// Jackknife acceleration constant.
    pub acceleration: f64,
    pub n_boot: usize,
    pub seed: u64,
    /// True when the bootstrap distribution collapsed to a point; the
    /// interval then degenerates to that point.
    pub degenerate: bool,
}

impl BcaInterval {
    pub fn excludes_zero(&self) -> bool {
        self.low > 0.0 || self.high < 0.0
    }
}

/// The two adjusted quantile levels of the BCa interval for bias `z0`,
/// acceleration `a`, and nominal coverage `level`.
///
/// With `z0 = 0` and `a = 0` this returns exactly the percentile levels
/// `((1-level)/2, (1+level)/2)`. A denominator crossing zero (|a| large)
/// clamps toward the corresponding endpoint.
pub fn bca_adjusted_levels(z0: f64, a: f64, level: f64) -> (f64, f64) {
    let alpha = (1.0 - level) / 2.0;
    let adjust = |q: f64| -> f64 {
        let z = norm_ppf(q);
        let denom = 1.0 - a * (z0 + z);
        if denom <= 0.0 {
            // Acceleration pushed the quantile past the support edge.
            return if z0 + z < 0.0 { 0.0 } else { 1.0 };
        }
        norm_cdf(z0 + (z0 + z) / denom).clamp(0.0, 1.0)
    };
    (adjust(alpha), adjust(1.0 - alpha))
}

/// Quantile of an ascending-sorted slice by linear interpolation at
/// position `q * (n - 1)`.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Shared BCa assembly once bootstrap and jackknife replicates exist.
fn assemble_bca(
    theta_hat: f64,
    mut boot: Vec<f64>,
    jack: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
) -> BcaInterval {
    boot.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let b = boot.len() as f64;
    let first = boot[0];
    if boot.iter().all(|&t| t == first) {
        return BcaInterval {
            low: first,
            high: first,
            level,
            z0: 0.0,
            acceleration: 0.0,
            n_boot,
            seed,
            degenerate: true,
        };
    }
    // Bias correction: fraction of replicates below the estimate, ties at
    // half weight, clamped away from {0, 1} before the normal quantile.
    let n_less = boot.iter().filter(|&&t| t < theta_hat).count() as f64;
    let n_eq = boot.iter().filter(|&&t| t == theta_hat).count() as f64;
    let p0 = ((n_less + 0.5 * n_eq) / b).clamp(1e-12, 1.0 - 1e-12);
    let z0 = norm_ppf(p0);
    // Jackknife acceleration.
    let acceleration = if jack.len() < 2 {
        0.0
    } else {
        let jm = jack.iter().sum::<f64>() / jack.len() as f64;
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for &ji in jack {
            let d = jm - ji;
            s2 += d * d;
            s3 += d * d * d;
        }
        if s2 <= 0.0 {
            0.0
        } else {
            s3 / (6.0 * s2.powf(1.5))
        }
    };
    let (q_lo, q_hi) = bca_adjusted_levels(z0, acceleration, level);
    BcaInterval {
        low: sorted_quantile(&boot, q_lo),
        high: sorted_quantile(&boot, q_hi),
        level,
        z0,
        acceleration,
        n_boot,
        seed,
        degenerate: false,
    }
}

fn is_degenerate(e: &StatsError) -> bool {
    matches!(
        e,
        StatsError::ConstantInput { .. } | StatsError::DegenerateVariance
    )
}

fn check_bca_params(level: f64, n_boot: usize) -> Result<(), StatsError> {
    if !(0.0 < level && level < 1.0) {
        return Err(StatsError::InvalidParameter {
            what: "confidence level must lie strictly between 0 and 1",
        });
    }
    // 100 replicates is the floor for the quantile arithmetic to be
    // meaningful at the 95% level; interval-width guarantees quoted
    // elsewhere assume thousands, and callers below that get a warning at
    // the CLI layer rather than an error here.
    if n_boot < 100 {
        return Err(StatsError::InvalidParameter {
            what: "BCa requires n_boot >= 100",
        });
    }
    Ok(())
}

/// BCa interval for a statistic of paired samples, resampling pairs.
///
/// Replicate `b` draws its indices from the substream `(seed, "boot", b)`.
/// Draws on which the statistic is degenerate (constant input, zero
/// variance) are rejected and redrawn from the same substream, up to a
/// bounded number of retries. The jackknife for the acceleration constant
/// deletes one pair at a time; delete-one sets on which the statistic is
/// degenerate are skipped.
pub fn bca_ci_paired<F>(
    x: &[f64],
    y: &[f64],
    stat: F,
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<BcaInterval, StatsError>
where
    F: Fn(&[f64], &[f64]) -> Result<f64, StatsError>,
{
    check_paired(x, y, 3)?;
    check_bca_params(level, n_boot)?;
    let n = x.len();
    let theta_hat = stat(x, y)?;

    let mut boot = Vec::with_capacity(n_boot);
    let mut xb = vec![0.0; n];
    let mut yb = vec![0.0; n];
    for b in 0..n_boot {
        let mut rng = SplitMix64::substream(seed, TAG_BOOTSTRAP, b as u64);
        let mut attempts = 0;
        let theta = loop {
            for slot in 0..n {
                let k = rng.next_below(n as u64) as usize;
                xb[slot] = x[k];
                yb[slot] = y[k];
            }
            match stat(&xb, &yb) {
                Ok(t) => break t,
                Err(e) if is_degenerate(&e) => {
                    attempts += 1;
                    if attempts >= MAX_RESAMPLE_RETRIES {
                        return Err(StatsError::ResampleRetriesExhausted { attempts });
                    }
                }
                Err(e) => return Err(e),
            }
        };
        boot.push(theta);
    }

    let mut jack = Vec::with_capacity(n);
    let mut xd = Vec::with_capacity(n - 1);
    let mut yd = Vec::with_capacity(n - 1);
    for drop in 0..n {
        xd.clear();
        yd.clear();
        for k in 0..n {
            if k != drop {
                xd.push(x[k]);
                yd.push(y[k]);
            }
        }
        match stat(&xd, &yd) {
            Ok(t) => jack.push(t),
            Err(e) if is_degenerate(&e) => continue,
            Err(e) => return Err(e),
        }
    }

    Ok(assemble_bca(theta_hat, boot, &jack, level, n_boot, seed))
}

/// BCa interval for a statistic of two independent groups, resampling each
/// group within itself (group-preserving). The jackknife deletes one
/// observation at a time across the concatenation of both groups.
pub fn bca_ci_two_sample<F>(
    a: &[f64],
    b: &[f64],
    stat: F,
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<BcaInterval, StatsError>
where
    F: Fn(&[f64], &[f64]) -> Result<f64, StatsError>,
{
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    check_bca_params(level, n_boot)?;
    let theta_hat = stat(a, b)?;

    let mut boot = Vec::with_capacity(n_boot);
    let mut ab = vec![0.0; a.len()];
    let mut bb = vec![0.0; b.len()];
    for rep in 0..n_boot {
        let mut rng = SplitMix64::substream(seed, TAG_BOOTSTRAP, rep as u64);
        let mut attempts = 0;
        let theta = loop {
            for slot in ab.iter_mut() {
                *slot = a[rng.next_below(a.len() as u64) as usize];
            }
            for slot in bb.iter_mut() {
                *slot = b[rng.next_below(b.len() as u64) as usize];
            }
            match stat(&ab, &bb) {
                Ok(t) => break t,
                Err(e) if is_degenerate(&e) => {
                    attempts += 1;
                    if attempts >= MAX_RESAMPLE_RETRIES {
                        return Err(StatsError::ResampleRetriesExhausted { attempts });
                    }
                }
                Err(e) => return Err(e),
            }
        };
        boot.push(theta);
    }

    let mut jack = Vec::with_capacity(a.len() + b.len());
    for drop in 0..a.len() {
        let ad: Vec<f64> = a
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != drop)
            .map(|(_, &v)| v)
            .collect();
        match stat(&ad, b) {
            Ok(t) => jack.push(t),
            Err(e) if is_degenerate(&e) => continue,
            Err(e) => return Err(e),
        }
    }
    for drop in 0..b.len() {
        let bd: Vec<f64> = b
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != drop)
            .map(|(_, &v)| v)
            .collect();
        match stat(a, &bd) {
            Ok(t) => jack.push(t),
            Err(e) if is_degenerate(&e) => continue,
            Err(e) => return Err(e),
        }
    }

    Ok(assemble_bca(theta_hat, boot, &jack, level, n_boot, seed))
}

/// One leave-one-out replicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LooEntry {
    /// Index of the dropped observation.
    pub index: usize,
    /// Correlation without that observation; `None` if dropping it left a
    /// constant input (flagged degenerate).
    pub r: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LooSensitivity {
    pub r_full: f64,
    pub entries: Vec<LooEntry>,
    /// Index whose removal moves the correlation the most.
    pub most_influential: usize,
    /// True iff every delete-one correlation is defined and negative.
    pub all_negative: bool,
}

/// Leave-one-out sensitivity of the Pearson correlation.
pub fn loo_sensitivity(x: &[f64], y: &[f64]) -> Result<LooSensitivity, StatsError> {
    check_paired(x, y, 4)?;
    let r_full = pearson(x, y)?;
    let n = x.len();
    let mut entries = Vec::with_capacity(n);
    let mut xd = Vec::with_capacity(n - 1);
    let mut yd = Vec::with_capacity(n - 1);
    for drop in 0..n {
        xd.clear();
        yd.clear();
        for k in 0..n {
            if k != drop {
                xd.push(x[k]);
                yd.push(y[k]);
            }
        }
        match pearson(&xd, &yd) {
            Ok(r) => entries.push(LooEntry {
                index: drop,
                r: Some(r),
                degenerate: false,
            }),
            Err(e) if is_degenerate(&e) => entries.push(LooEntry {
                index: drop,
                r: None,
                degenerate: true,
            }),
            Err(e) => return Err(e),
        }
    }
    let most_influential = entries
        .iter()
        .filter_map(|e| e.r.map(|r| (e.index, (r - r_full).abs())))
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite"))
        .map(|(i, _)| i)
        .expect("at least one defined LOO replicate");
    let all_negative = entries.iter().all(|e| matches!(e.r, Some(r) if r < 0.0));
    Ok(LooSensitivity {
        r_full,
        entries,
        most_influential,
        all_negative,
    })
}

/// Two-group contrast: means, effect sizes under both standardizer
/// conventions, pooled t-test, and a group-preserving BCa interval for the
/// primary effect size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupComparison {
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// mean_a - mean_b.
    pub delta: f64,
    /// Primary effect size: delta divided by the root mean square of the
    /// two unbiased group standard deviations, sqrt((s_a^2 + s_b^2)/2).
    pub d: f64,
    /// Companion convention: delta divided by the population-pooled SD
    /// sqrt((SS_a + SS_b)/(n_a + n_b)). Reported alongside because the two
    /// conventions differ noticeably at these group sizes.
    pub d_population: f64,
    pub d_ci: BcaInterval,
    /// Classic pooled two-sample t statistic.
    pub t: f64,
    pub df: f64,
    pub p_two_tailed: f64,
}

fn mean_and_ss(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let ss = v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>();
    (m, ss)
}

/// The primary effect-size statistic used for both the point estimate and
/// its bootstrap replicates.
fn d_rms_stat(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let va = ssa / (a.len() - 1) as f64;
    let vb = ssb / (b.len() - 1) as f64;
    let s = ((va + vb) / 2.0).sqrt();
    if s == 0.0 {
        return if ma == mb {
            Ok(0.0)
        } else {
            Err(StatsError::DegenerateVariance)
        };
    }
    Ok((ma - mb) / s)
}

/// Effect size and significance of the difference between two groups.
///
/// `a` is conventionally the focal group (its mean enters positively).
pub fn cohens_d(
    a: &[f64],
    b: &[f64],
    level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<GroupComparison, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    let (na, nb) = (a.len(), b.len());
    let (ma, ssa) = mean_and_ss(a);
    let (mb, ssb) = mean_and_ss(b);
    let delta = ma - mb;
    let d = d_rms_stat(a, b)?;
    let s_pop = ((ssa + ssb) / (na + nb) as f64).sqrt();
    let d_population = if s_pop == 0.0 { 0.0 } else { delta / s_pop };
    // Pooled t-test.
    let df = (na + nb - 2) as f64;
    let sp2 = (ssa + ssb) / df;
    let se = (sp2 * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
    let (t, p_two_tailed) = if se == 0.0 {
        if delta == 0.0 {
            (0.0, 1.0)
        } else {
            return Err(StatsError::DegenerateVariance);
        }
    } else {
        let t = delta / se;
        (t, 2.0 * (1.0 - t_cdf(t.abs(), df)?))
    };
    let d_ci = bca_ci_two_sample(a, b, d_rms_stat, level, n_boot, seed)?;
    Ok(GroupComparison {
        n_a: na,
        n_b: nb,
        mean_a: ma,
        mean_b: mb,
        delta,
        d,
        d_population,
        d_ci,
        t,
        df,
        p_two_tailed,
    })
}

/// Bonferroni decisions for a family of p-values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipleComparisons {
    pub alpha: f64,
    pub n_tests: usize,
    /// alpha / n_tests.
    pub threshold: f64,
    pub raw_significant: Vec<bool>,
    pub corrected_significant: Vec<bool>,
}

pub fn bonferroni(
    p_values: &[f64],
    alpha: f64,
    n_tests: usize,
) -> Result<MultipleComparisons, StatsError> {
    if n_tests == 0 || !(0.0 < alpha && alpha < 1.0) {
        return Err(StatsError::InvalidParameter {
            what: "bonferroni requires n_tests >= 1 and alpha in (0, 1)",
        });
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(StatsError::InvalidParameter {
            what: "p-values must lie in [0, 1]",
        });
    }
    let threshold = alpha / n_tests as f64;
    Ok(MultipleComparisons {
        alpha,
        n_tests,
        threshold,
        raw_significant: p_values.iter().map(|&p| p < alpha).collect(),
        corrected_significant: p_values.iter().map(|&p| p < threshold).collect(),
    })
}

/// Ordinary least squares slope of y on x.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_paired(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantInput { which: "x" });
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Per-model ROI alignment and final agreement rates used as a realistic
    // 12-point workload; expected values frozen from an independent
    // reference implementation.
    const PRF: [f64; 12] = [
        0.350, 0.340, 0.338, 0.316, 0.356, 0.302, 0.362, 0.308, 0.324, 0.332, 0.329, 0.273,
    ];
    const FINAL_RATE: [f64; 12] = [
        0.037, 0.085, 0.235, 0.422, 0.602, 0.616, 0.731, 0.947, 0.965, 0.965, 0.986, 0.995,
    ];

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn pearson_exact_cases() {
        close(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0, 1e-14);
        close(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0, 1e-14);
        close(
            pearson(&PRF, &FINAL_RATE).unwrap(),
            -0.440_156_819_383,
            1e-12,
        );
    }

    #[test]
    fn pearson_invariances() {
        let x = [0.3, 1.7, -0.2, 4.4, 2.2];
        let y = [1.0, 0.4, 2.2, -0.7, 0.1];
        let r = pearson(&x, &y).unwrap();
        let x_scaled: Vec<f64> = x.iter().map(|v| 3.5 * v + 10.0).collect();
        close(pearson(&x_scaled, &y).unwrap(), r, 1e-12);
        let x_neg: Vec<f64> = x.iter().map(|v| -v).collect();
        close(pearson(&x_neg, &y).unwrap(), -r, 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ConstantInput { which: "x" })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 2.0]),
            Err(StatsError::TooFewPoints { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::NonFiniteInput)
        ));
    }

    #[test]
    fn spearman_reference_values() {
        close(
            spearman(&[1.0, 2.0, 5.0, 9.0], &[10.0, 20.0, 21.0, 40.0]).unwrap(),
            1.0,
            1e-14,
        );
        // Tie handling via average ranks.
        close(
            spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            0.948_683_298_050_513_8,
            1e-12,
        );
        close(
            spearman(&PRF, &FINAL_RATE).unwrap(),
            -0.504_379_057_204,
            1e-12,
        );
    }

    #[test]
    fn analytic_p_reference_values() {
        close(p_from_r(-0.597, 12).unwrap(), 0.040_415_500_075_496_71, 1e-12);
        close(p_from_r(-0.441, 12).unwrap(), 0.151_278_129_5, 1e-9);
        close(p_from_r(-0.255, 12).unwrap(), 0.423_781_849_2, 1e-9);
        close(p_from_r(-0.389, 12).unwrap(), 0.211_377_563_8, 1e-9);
        assert_eq!(p_from_r(1.0, 12).unwrap(), 0.0);
        assert_eq!(p_from_r(-1.0, 5).unwrap(), 0.0);
        close(p_from_r(0.0, 12).unwrap(), 1.0, 1e-12);
        assert!(p_from_r(0.5, 2).is_err());
        assert!(p_from_r(1.5, 12).is_err());
    }

    #[test]
    fn permutation_test_behaviour() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y_rev: Vec<f64> = (0..10).map(|i| (9 - i) as f64).collect();
        let t = perm_test_negative(&x, &y_rev, 1000, 7).unwrap();
        close(t.r_observed, -1.0, 1e-14);
        // Only the exact reversal ties the observed minimum; with 10! orders
        // it is effectively never drawn, leaving the smoothed floor.
        close(t.p_one_tailed_negative, 1.0 / 1001.0, 1e-12);
        // Determinism.
        let t2 = perm_test_negative(&x, &y_rev, 1000, 7).unwrap();
        assert_eq!(
            t.p_one_tailed_negative.to_bits(),
            t2.p_one_tailed_negative.to_bits()
        );
        assert!(perm_test_negative(&x, &y_rev, 10, 7).is_err());
    }

    #[test]
    fn bca_reduces_to_percentile_without_bias_or_acceleration() {
        let (lo, hi) = bca_adjusted_levels(0.0, 0.0, 0.95);
        close(lo, 0.025, 1e-12);
        close(hi, 0.975, 1e-12);
        let (lo, hi) = bca_adjusted_levels(0.0, 0.0, 0.80);
        close(lo, 0.10, 1e-12);
        close(hi, 0.90, 1e-12);
    }

    #[test]
    fn bca_degenerate_statistic_collapses_to_point() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [5.0, 3.0, 1.0, 2.0, 4.0];
        let ci = bca_ci_paired(&x, &y, |_, _| Ok(0.5), 0.95, 1000, 3).unwrap();
        assert!(ci.degenerate);
        assert_eq!(ci.low, 0.5);
        assert_eq!(ci.high, 0.5);
    }

    #[test]
    fn bca_interval_brackets_estimate_on_smooth_data() {
        let ci = bca_ci_paired(&PRF, &FINAL_RATE, pearson, 0.95, 2000, 42).unwrap();
        let r = pearson(&PRF, &FINAL_RATE).unwrap();
        assert!(ci.low < r && r < ci.high, "{ci:?} should bracket {r}");
        assert!(!ci.degenerate);
        assert!(ci.low >= -1.0 && ci.high <= 1.0);
        // Determinism across calls.
        let ci2 = bca_ci_paired(&PRF, &FINAL_RATE, pearson, 0.95, 2000, 42).unwrap();
        assert_eq!(ci.low.to_bits(), ci2.low.to_bits());
        assert_eq!(ci.high.to_bits(), ci2.high.to_bits());
    }

    #[test]
    fn loo_reference_values() {
        let loo = loo_sensitivity(&PRF, &FINAL_RATE).unwrap();
        close(loo.r_full, -0.440_156_819_4, 1e-9);
        assert!(loo.all_negative);
        assert_eq!(loo.entries.len(), 12);
        let rs: Vec<f64> = loo.entries.iter().map(|e| e.r.unwrap()).collect();
        let min = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        close(min, -0.531_330_683_3, 1e-9);
        close(max, -0.324_254_608_2, 1e-9);
        // Dropping the last model moves the correlation the most.
        assert_eq!(loo.most_influential, 11);
        close(rs[0], -0.358_388_633_8, 1e-9);
        close(rs[6], -0.531_330_683_3, 1e-9);
    }

    #[test]
    fn cohens_d_reference_values() {
        // Resistant (4) vs susceptible (8) split of the 12-model panel on
        // two ROI columns; frozen from the reference implementation.
        let prf_a = [0.350, 0.340, 0.338, 0.316];
        let prf_b = [0.356, 0.302, 0.362, 0.308, 0.324, 0.332, 0.329, 0.273];
        let g = cohens_d(&prf_a, &prf_b, 0.95, 2000, 11).unwrap();
        close(g.mean_a, 0.336, 1e-12);
        close(g.mean_b, 0.323_25, 1e-12);
        close(g.delta, 0.012_75, 1e-12);
        close(g.d, 0.557_182_579_6, 1e-9);
        close(g.d_population, 0.547_427_981_2, 1e-9);
        close(g.t, 0.816_057_452_5, 1e-9);
        close(g.p_two_tailed, 0.433_475_703_2, 1e-9);
        assert_eq!(g.df, 10.0);

        let streams_a = [0.367, 0.378, 0.377, 0.370];
        let streams_b = [0.381, 0.327, 0.389, 0.367, 0.372, 0.376, 0.357, 0.339];
        let g = cohens_d(&streams_a, &streams_b, 0.95, 2000, 11).unwrap();
        close(g.d, 0.612_069_745_5, 1e-9);
        close(g.d_population, 0.576_552_272_6, 1e-9);
        close(g.t, 0.859_473_382_7, 1e-9);
    }

    #[test]
    fn cohens_d_degenerate_groups() {
        // Both groups constant with equal means: zero effect, not an error.
        let g = cohens_d(&[2.0, 2.0], &[2.0, 2.0, 2.0], 0.95, 1000, 1).unwrap();
        assert_eq!(g.d, 0.0);
        assert_eq!(g.t, 0.0);
        assert_eq!(g.p_two_tailed, 1.0);
        // Constant groups with unequal means: undefined standardizer.
        assert!(matches!(
            cohens_d(&[1.0, 1.0], &[2.0, 2.0, 2.0], 0.95, 1000, 1),
            Err(StatsError::DegenerateVariance)
        ));
    }

    #[test]
    fn bonferroni_decisions() {
        let m = bonferroni(&[0.040, 0.010, 0.200, 0.0015], 0.05, 30).unwrap();
        close(m.threshold, 0.05 / 30.0, 1e-15);
        assert_eq!(m.raw_significant, vec![true, true, false, true]);
        assert_eq!(m.corrected_significant, vec![false, false, false, true]);
        assert!(bonferroni(&[0.5], 0.05, 0).is_err());
        assert!(bonferroni(&[1.5], 0.05, 6).is_err());
    }

    #[test]
    fn ols_slope_known_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        close(ols_slope(&x, &y).unwrap(), 2.0, 1e-12);
        // Step pattern used by the resistance-curve checks: resist levels
        // 1-6, capitulate 7-10.
        let levels: Vec<f64> = (1..=10).map(|l| l as f64).collect();
        let resist = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        close(ols_slope(&levels, &resist).unwrap(), -12.0 / 82.5, 1e-12);
    }

    #[test]
    fn average_ranks_handles_ties() {
        let r = average_ranks(&[10.0, 20.0, 20.0, 5.0]);
        assert_eq!(r, vec![2.0, 3.5, 3.5, 1.0]);
    }
}
