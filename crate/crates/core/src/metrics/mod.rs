//! Scalar evaluation measures.
//!
//! Three families live here. Classifier performance: [`auc`],
//! [`ks_discrimination`], [`f_measure`]. Synthetic-data fidelity:
//! [`kstest_quality`] for numeric marginals, [`cstest_quality`] for
//! categorical ones, and (in [`detection`]) a logistic detector score.
//! Significance: [`paired_t_test`] over per-fold metric vectors.

mod detection;
pub mod special;

pub use detection::{logistic_detection, quality_report, ColumnScore, QualityReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use special::{chi_square_sf, student_t_two_sided};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need both classes present, found only one")]
    OneClass,
    #[error("score {0} outside [0,1] or not finite")]
    BadScore(f64),
    #[error("labels and predictions must be 0 or 1, found {0}")]
    BadBinary(u32),
    #[error("category code {0} out of range for {1} categories")]
    BadCategory(u32, usize),
    #[error("need at least {need} folds, got {got}")]
    TooFewFolds { need: usize, got: usize },
    #[error("baseline mean is zero, relative difference undefined")]
    ZeroBaseline,
    #[error("datasets must share a schema")]
    SchemaMismatch,
    #[error("detection pipeline failed: {0}")]
    Pipeline(String),
}

/// Scores in [0,1] paired with binary labels.
#[derive(Debug, Clone)]
pub struct ScoredSample {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSample {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self, MetricError> {
        if scores.len() != labels.len() {
            return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
        }
        if scores.is_empty() {
            return Err(MetricError::Empty("scored sample"));
        }
        for &s in &scores {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(MetricError::BadScore(s));
            }
        }
        for &l in &labels {
            if l > 1 {
                return Err(MetricError::BadBinary(u32::from(l)));
            }
        }
        Ok(ScoredSample { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn class_scores(&self, class: u8) -> Vec<f64> {
        self.scores
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == class)
            .map(|(&s, _)| s)
            .collect()
    }
}

/// Kolmogorov-Smirnov statistic: the largest gap between the two empirical
/// CDFs, evaluated exactly by a merge walk over the pooled sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::Empty("ks_statistic sample"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] == t {
            i += 1;
        }
        while j < y.len() && y[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Marginal fidelity of a numeric column: `1 - ks_statistic`. Higher is
/// better; identical marginals score 1.
pub fn kstest_quality(real_col: &[f64], synth_col: &[f64]) -> Result<f64, MetricError> {
    Ok(1.0 - ks_statistic(real_col, synth_col)?)
}

/// Marginal fidelity of a categorical column: the p-value of a chi-square
/// test of the synthetic category frequencies against the real frequencies
/// as the expected distribution.
///
/// The statistic is computed on relative frequencies, not raw counts, so
/// the score reflects how far the synthetic distribution sits from the
/// real one rather than growing with sample size: a close match stays
/// near 1 no matter how many rows are compared. The real column defines
/// the expectation, so the arguments are not interchangeable.
///
/// Categories absent from both samples are dropped. Any category whose
/// expected synthetic count under the real frequencies falls below 5 is
/// pooled into a neighbour (the leftmost offender merges rightward, the
/// last category merges leftward); this also folds categories the real
/// sample never exhibits into their neighbours. If pooling collapses
/// everything into a single category the test has no evidence either way
/// and returns 1.
pub fn cstest_quality(
    real_col: &[u32],
    synth_col: &[u32],
    n_categories: usize,
) -> Result<f64, MetricError> {
    if real_col.is_empty() || synth_col.is_empty() {
        return Err(MetricError::Empty("cstest_quality sample"));
    }
    let mut count_r = vec![0.0f64; n_categories];
    let mut count_s = vec![0.0f64; n_categories];
    for &c in real_col {
        if c as usize >= n_categories {
            return Err(MetricError::BadCategory(c, n_categories));
        }
        count_r[c as usize] += 1.0;
    }
    for &c in synth_col {
        if c as usize >= n_categories {
            return Err(MetricError::BadCategory(c, n_categories));
        }
        count_s[c as usize] += 1.0;
    }

    let mut bins: Vec<(f64, f64)> = count_r
        .into_iter()
        .zip(count_s)
        .filter(|(r, s)| r + s > 0.0)
        .collect();

    let n_r: f64 = bins.iter().map(|(r, _)| r).sum();
    let n_s: f64 = bins.iter().map(|(_, s)| s).sum();

    let too_small = |bin: &(f64, f64)| bin.0 / n_r * n_s < 5.0;
    while bins.len() > 1 {
        let Some(pos) = bins.iter().position(too_small) else {
            break;
        };
        let into = if pos + 1 < bins.len() { pos + 1 } else { pos - 1 };
        bins[into].0 += bins[pos].0;
        bins[into].1 += bins[pos].1;
        bins.remove(pos);
    }

    if bins.len() <= 1 {
        return Ok(1.0);
    }

    let mut statistic = 0.0;
    for (r, s) in &bins {
        let f_exp = r / n_r;
        let f_obs = s / n_s;
        statistic += (f_obs - f_exp).powi(2) / f_exp;
    }
    let df = (bins.len() - 1) as u32;
    Ok(chi_square_sf(statistic, df))
}

/// Area under the ROC curve via the exact tie-aware rank formulation:
/// the probability a random positive outscores a random negative, counting
/// ties as half.
pub fn auc(sample: &ScoredSample) -> Result<f64, MetricError> {
    let n_pos = sample.labels.iter().filter(|&&l| l == 1).count();
    let n_neg = sample.labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::OneClass);
    }
    let mut order: Vec<usize> = (0..sample.scores.len()).collect();
    order.sort_by(|&i, &j| sample.scores[i].total_cmp(&sample.scores[j]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && sample.scores[order[j + 1]] == sample.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if sample.labels[k] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    Ok((rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64))
}

/// Discriminatory power of a score: the KS distance between the score
/// distributions of the two classes.
pub fn ks_discrimination(sample: &ScoredSample) -> Result<f64, MetricError> {
    let pos = sample.class_scores(1);
    let neg = sample.class_scores(0);
    if pos.is_empty() || neg.is_empty() {
        return Err(MetricError::OneClass);
    }
    ks_statistic(&pos, &neg)
}

/// F-measure (harmonic mean of precision and recall) of binary
/// predictions. Returns 0 when precision and recall are both 0.
pub fn f_measure(predictions: &[u8], labels: &[u8]) -> Result<f64, MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch(predictions.len(), labels.len()));
    }
    let (mut tp, mut fp, mut fn_) = (0.0f64, 0.0f64, 0.0f64);
    for (&p, &l) in predictions.iter().zip(labels) {
        if p > 1 {
            return Err(MetricError::BadBinary(u32::from(p)));
        }
        if l > 1 {
            return Err(MetricError::BadBinary(u32::from(l)));
        }
        match (p, l) {
            (1, 1) => tp += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fn_ += 1.0,
            _ => {}
        }
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Outcome of a paired two-sided t-test between per-fold metric vectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairedComparison {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    /// mean(a - b) / mean(b), in percent; negative when a underperforms b.
    pub relative_diff_pct: f64,
    /// t statistic; 0 when the test is degenerate.
    pub t: f64,
    pub p: f64,
    pub significant_05: bool,
    pub significant_10: bool,
    /// Set when the fold differences have zero variance, in which case p is
    /// 0 for a nonzero mean difference and 1 otherwise.
    pub degenerate: bool,
}

/// Paired two-sided t-test on per-fold differences `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedComparison, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let k = a.len();
    if k < 2 {
        return Err(MetricError::TooFewFolds { need: 2, got: k });
    }
    let mean_a = a.iter().sum::<f64>() / k as f64;
    let mean_b = b.iter().sum::<f64>() / k as f64;
    if mean_b == 0.0 {
        return Err(MetricError::ZeroBaseline);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean_d = diffs.iter().sum::<f64>() / k as f64;
    let var_d = diffs.iter().map(|d| (d - mean_d).powi(2)).sum::<f64>() / (k as f64 - 1.0);
    let relative_diff_pct = 100.0 * mean_d / mean_b;

    let (t, p, degenerate) = if var_d == 0.0 {
        (0.0, if mean_d != 0.0 { 0.0 } else { 1.0 }, true)
    } else {
        let t = mean_d / (var_d.sqrt() / (k as f64).sqrt());
        (t, student_t_two_sided(t, (k - 1) as u32), false)
    };

    Ok(PairedComparison {
        a: a.to_vec(),
        b: b.to_vec(),
        mean_a,
        mean_b,
        relative_diff_pct,
        t,
        p,
        significant_05: p < 0.05,
        significant_10: p < 0.1,
        degenerate,
    })
}
