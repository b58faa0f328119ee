//! Feature screening: a univariate power filter followed by greedy
//! correlation-based redundancy elimination.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{auc, ks_discrimination, MetricError, ScoredSample};
use crate::tabular::{ColumnKind, Dataset, TabularError};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("dataset has no label column")]
    Unlabeled,
    #[error("feature `{0}` not present in the dataset")]
    UnknownFeature(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// How pairwise feature correlation is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectConfig {
    pub ks_min: f64,
    pub auc_min: f64,
    pub rho: f64,
    pub correlation: CorrelationKind,
}

impl Default for SelectConfig {
    fn default() -> SelectConfig {
        SelectConfig {
            ks_min: 0.01,
            auc_min: 0.53,
            rho: 0.7,
            correlation: CorrelationKind::Pearson,
        }
    }
}

/// Single-feature discriminatory power against the label. The AUC is
/// orientation-corrected (`max(a, 1-a)`), so anti-predictive features are
/// judged by the strength of the signal, not its direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateScore {
    pub feature: String,
    pub ks: f64,
    pub auc: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "kebab-case")]
pub enum RejectionCause {
    LowPower,
    CorrelatedWith { feature: String, correlation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub feature: String,
    #[serde(flatten)]
    pub cause: RejectionCause,
}

/// Outcome of a full screening pass: every candidate with its scores, the
/// surviving feature names in selection order, and why the rest fell out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ranked: Vec<UnivariateScore>,
    pub selected: Vec<String>,
    pub rejections: Vec<Rejection>,
    pub rho: f64,
}

impl SelectionResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,ks,auc,status,cause\n");
        for s in &self.ranked {
            let (status, cause) = if self.selected.contains(&s.feature) {
                ("selected", String::new())
            } else {
                match self.rejections.iter().find(|r| r.feature == s.feature) {
                    Some(Rejection {
                        cause: RejectionCause::LowPower,
                        ..
                    }) => ("rejected", "low-power".to_string()),
                    Some(Rejection {
                        cause: RejectionCause::CorrelatedWith {
                            feature,
                            correlation,
                        },
                        ..
                    }) => ("rejected", format!("correlated-with {feature} (r={correlation})")),
                    None => ("rejected", "not-ranked".to_string()),
                }
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.feature, s.ks, s.auc, status, cause
            ));
        }
        out
    }
}

fn scored_sample(values: Vec<f64>, labels: &[u8]) -> Result<ScoredSample, MetricError> {
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let normalized: Vec<f64> = if max > min {
        values.iter().map(|&v| (v - min) / (max - min)).collect()
    } else {
        vec![0.5; values.len()]
    };
    ScoredSample::new(normalized, labels.to_vec())
}

/// Raw feature values recast as classifier scores: numerics are min-max
/// scaled (rank metrics are unaffected), categoricals take their observed
/// per-category event rate.
fn feature_scores(d: &Dataset, index: usize, labels: &[u8]) -> Result<ScoredSample, SelectError> {
    let schema = d.schema();
    let col = schema.column(index);
    let values: Vec<f64> = match col.kind() {
        ColumnKind::Numeric => d.numeric_column(col.name())?,
        ColumnKind::Categorical => {
            let codes = d.categorical_column(col.name())?;
            let k = col.categories().len();
            let mut events = vec![0.0f64; k];
            let mut totals = vec![0.0f64; k];
            for (c, &y) in codes.iter().zip(labels) {
                events[*c as usize] += f64::from(y);
                totals[*c as usize] += 1.0;
            }
            let overall = labels.iter().map(|&y| f64::from(y)).sum::<f64>() / labels.len() as f64;
            let rates: Vec<f64> = events
                .iter()
                .zip(&totals)
                .map(|(e, t)| if *t > 0.0 { e / t } else { overall })
                .collect();
            codes.iter().map(|&c| rates[c as usize]).collect()
        }
    };
    Ok(scored_sample(values, labels)?)
}

/// Scores every feature independently and flags the ones clearing both
/// thresholds. Sorted by corrected AUC, then KS, then name.
pub fn univariate_filter(
    d: &Dataset,
    ks_min: f64,
    auc_min: f64,
) -> Result<Vec<UnivariateScore>, SelectError> {
    let labels = d.labels().map_err(|_| SelectError::Unlabeled)?;
    let mut scores = Vec::new();
    for index in d.schema().feature_indices() {
        let sample = feature_scores(d, index, &labels)?;
        let ks = ks_discrimination(&sample)?;
        let raw = auc(&sample)?;
        let corrected = raw.max(1.0 - raw);
        scores.push(UnivariateScore {
            feature: d.schema().column(index).name().to_string(),
            ks,
            auc: corrected,
            passes: ks >= ks_min && corrected >= auc_min,
        });
    }
    scores.sort_by(|a, b| {
        b.auc
            .total_cmp(&a.auc)
            .then(b.ks.total_cmp(&a.ks))
            .then(a.feature.cmp(&b.feature))
    });
    Ok(scores)
}

fn rank_transform(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    let denom = (va * vb).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        cov / denom
    }
}

/// A feature's correlation columns: the raw values for a numeric column,
/// one indicator column per category otherwise.
fn correlation_columns(
    d: &Dataset,
    name: &str,
    kind: CorrelationKind,
) -> Result<Vec<Vec<f64>>, SelectError> {
    let schema = d.schema();
    let index = schema
        .index_of(name)
        .ok_or_else(|| SelectError::UnknownFeature(name.to_string()))?;
    let col = schema.column(index);
    let mut cols = match col.kind() {
        ColumnKind::Numeric => vec![d.numeric_column(name)?],
        ColumnKind::Categorical => {
            let codes = d.categorical_column(name)?;
            (0..col.categories().len())
                .map(|c| {
                    codes
                        .iter()
                        .map(|&v| f64::from(u8::from(v as usize == c)))
                        .collect()
                })
                .collect()
        }
    };
    if kind == CorrelationKind::Spearman {
        for c in cols.iter_mut() {
            *c = rank_transform(c);
        }
    }
    Ok(cols)
}

fn feature_correlation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for ca in a {
        for cb in b {
            let r = pearson(ca, cb).abs();
            if r > best {
                best = r;
            }
        }
    }
    best
}

/// Greedy redundancy pass over an already-ranked candidate list: keep the
/// best remaining feature, drop everything correlated with it beyond
/// `rho`, repeat until the list is exhausted.
pub fn correlation_select(
    scores: &[UnivariateScore],
    d: &Dataset,
    rho: f64,
    kind: CorrelationKind,
) -> Result<SelectionResult, SelectError> {
    let mut columns: HashMap<&str, Vec<Vec<f64>>> = HashMap::new();
    for s in scores {
        columns.insert(s.feature.as_str(), correlation_columns(d, &s.feature, kind)?);
    }

    let mut remaining: Vec<&UnivariateScore> = scores.iter().collect();
    let mut selected = Vec::new();
    let mut rejections = Vec::new();
    while !remaining.is_empty() {
        let head = remaining.remove(0);
        selected.push(head.feature.clone());
        let head_cols = &columns[head.feature.as_str()];
        remaining.retain(|other| {
            let r = feature_correlation(head_cols, &columns[other.feature.as_str()]);
            if r > rho {
                rejections.push(Rejection {
                    feature: other.feature.clone(),
                    cause: RejectionCause::CorrelatedWith {
                        feature: head.feature.clone(),
                        correlation: r,
                    },
                });
                false
            } else {
                true
            }
        });
    }
    Ok(SelectionResult {
        ranked: scores.to_vec(),
        selected,
        rejections,
        rho,
    })
}

/// Full screening pass: univariate filter, then greedy redundancy
/// elimination over the survivors. Low-power features go straight to the
/// rejection log.
pub fn select_features(d: &Dataset, cfg: &SelectConfig) -> Result<SelectionResult, SelectError> {
    let ranked = univariate_filter(d, cfg.ks_min, cfg.auc_min)?;
    let passing: Vec<UnivariateScore> = ranked.iter().filter(|s| s.passes).cloned().collect();
    let mut result = correlation_select(&passing, d, cfg.rho, cfg.correlation)?;
    for s in &ranked {
        if !s.passes {
            result.rejections.push(Rejection {
                feature: s.feature.clone(),
                cause: RejectionCause::LowPower,
            });
        }
    }
    result.ranked = ranked;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::tabular::{ColumnSchema, FeatureGroup, Schema};

    fn labeled_numeric(columns: Vec<(&str, Vec<f64>)>, labels: Vec<u8>) -> Dataset {
        let mut cols: Vec<ColumnSchema> = columns
            .iter()
            .map(|(name, _)| ColumnSchema::numeric(*name, FeatureGroup::Other).unwrap())
            .collect();
        cols.push(ColumnSchema::label("y").unwrap());
        let schema = Schema::new(cols).unwrap();
        let rows: Vec<Vec<Cell>> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let mut row: Vec<Cell> =
                    columns.iter().map(|(_, v)| Cell::Num(v[i])).collect();
                row.push(Cell::Cat(u32::from(y)));
                row
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn label_copy_feature_is_a_perfect_predictor() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 3 == 0)).collect();
        let copy: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
        let d = labeled_numeric(vec![("copy", copy)], labels);
        let scores = univariate_filter(&d, 0.01, 0.53).unwrap();
        assert_eq!(scores[0].ks, 1.0);
        assert_eq!(scores[0].auc, 1.0);
        assert!(scores[0].passes);
    }

    #[test]
    fn noise_feature_fails_the_auc_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let labels: Vec<u8> = (0..10_000).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let noise: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = labeled_numeric(vec![("noise", noise)], labels);
        let scores = univariate_filter(&d, 0.01, 0.53).unwrap();
        assert!((scores[0].auc - 0.5).abs() < 0.02, "auc {}", scores[0].auc);
        assert!(!scores[0].passes);
    }

    #[test]
    fn anti_predictive_feature_is_judged_after_flipping() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let labels: Vec<u8> = (0..2000).map(|i| u8::from(i % 2 == 0)).collect();
        let inverted: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let z: f64 = StandardNormal.sample(&mut rng);
                f64::from(1 - y) + 0.5 * z
            })
            .collect();
        let d = labeled_numeric(vec![("inv", inverted.clone())], labels.clone());
        let scores = univariate_filter(&d, 0.01, 0.53).unwrap();
        let raw = auc(&scored_sample(inverted, &labels).unwrap()).unwrap();
        assert!(raw < 0.3, "construction should be anti-predictive, raw {raw}");
        assert!((scores[0].auc - (1.0 - raw)).abs() < 1e-12);
        assert!(scores[0].passes);
    }

    #[test]
    fn categorical_features_score_by_event_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let schema = Schema::new(vec![
            ColumnSchema::categorical(
                "grade",
                FeatureGroup::Fin,
                vec!["a".into(), "b".into(), "c".into()],
            )
            .unwrap(),
            ColumnSchema::label("y").unwrap(),
        ])
        .unwrap();
        let rates = [0.8, 0.5, 0.2];
        let rows: Vec<Vec<Cell>> = (0..1500)
            .map(|i| {
                let g = i % 3;
                let y = u32::from(rng.random::<f64>() < rates[g]);
                vec![Cell::Cat(g as u32), Cell::Cat(y)]
            })
            .collect();
        let d = Dataset::new(schema, rows).unwrap();
        let scores = univariate_filter(&d, 0.01, 0.53).unwrap();
        assert!(scores[0].auc > 0.6, "graded rates give auc {}", scores[0].auc);
        assert!(scores[0].passes);
    }

    #[test]
    fn unlabeled_dataset_is_rejected() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("a", FeatureGroup::Other).unwrap()
        ])
        .unwrap();
        let d = Dataset::new(schema, vec![vec![Cell::Num(0.0)], vec![Cell::Num(1.0)]]).unwrap();
        assert!(matches!(
            univariate_filter(&d, 0.01, 0.53),
            Err(SelectError::Unlabeled)
        ));
    }

    #[test]
    fn duplicate_features_collapse_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let labels: Vec<u8> = (0..1000).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let base: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let z: f64 = StandardNormal.sample(&mut rng);
                f64::from(y) + z
            })
            .collect();
        let d = labeled_numeric(
            vec![("first", base.clone()), ("second", base)],
            labels,
        );
        let result = select_features(&d, &SelectConfig::default()).unwrap();
        assert_eq!(result.selected.len(), 1);
        let rej = &result.rejections[0];
        match &rej.cause {
            RejectionCause::CorrelatedWith { feature, correlation } => {
                assert_eq!(feature, &result.selected[0]);
                assert!((correlation - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected cause {other:?}"),
        }
    }

    #[test]
    fn uncorrelated_trio_all_survive() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let n = 2000;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(pearson(&cols[i], &cols[j]).abs() < 0.1);
            }
        }
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let d = labeled_numeric(
            vec![
                ("x1", cols[0].clone()),
                ("x2", cols[1].clone()),
                ("x3", cols[2].clone()),
            ],
            labels,
        );
        let fake_rank = |name: &str, a: f64| UnivariateScore {
            feature: name.into(),
            ks: a,
            auc: a,
            passes: true,
        };
        let scores = vec![fake_rank("x1", 0.9), fake_rank("x2", 0.8), fake_rank("x3", 0.7)];
        let result = correlation_select(&scores, &d, 0.7, CorrelationKind::Pearson).unwrap();
        assert_eq!(result.selected, ["x1", "x2", "x3"]);
        assert!(result.rejections.is_empty());
    }

    #[test]
    fn greedy_pass_follows_the_rank_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let n = 4000;
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x2: Vec<f64> = z
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.9 * v + (1.0f64 - 0.81).sqrt() * e
            })
            .collect();
        let x3: Vec<f64> = z
            .iter()
            .map(|&v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.2 * v + (1.0f64 - 0.04).sqrt() * e
            })
            .collect();
        assert!((pearson(&z, &x2) - 0.9).abs() < 0.03);
        assert!((pearson(&z, &x3) - 0.2).abs() < 0.05);
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let d = labeled_numeric(
            vec![("x1", z), ("x2", x2), ("x3", x3)],
            labels,
        );
        let fake = |name: &str, a: f64| UnivariateScore {
            feature: name.into(),
            ks: a,
            auc: a,
            passes: true,
        };
        let scores = vec![fake("x1", 0.9), fake("x2", 0.8), fake("x3", 0.7)];
        let result = correlation_select(&scores, &d, 0.7, CorrelationKind::Pearson).unwrap();
        assert_eq!(result.selected, ["x1", "x3"]);
        assert_eq!(result.rejections.len(), 1);
        assert_eq!(result.rejections[0].feature, "x2");
    }

    #[test]
    fn widening_rho_can_shrink_the_selected_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let n = 6000;
        let mut x1 = Vec::with_capacity(n);
        let mut x2 = Vec::with_capacity(n);
        let mut x3 = Vec::with_capacity(n);
        let mut x4 = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e3: f64 = StandardNormal.sample(&mut rng);
            let e4: f64 = StandardNormal.sample(&mut rng);
            x2.push(u);
            x1.push(0.75 * u + 0.6614 * e1);
            x3.push(0.85 * u + 0.35 * v + 0.3937 * e3);
            x4.push(0.85 * u - 0.35 * v + 0.3937 * e4);
        }
        assert!((pearson(&x1, &x2) - 0.75).abs() < 0.03);
        assert!((pearson(&x2, &x3) - 0.85).abs() < 0.03);
        assert!((pearson(&x3, &x4) - 0.6).abs() < 0.04);
        assert!(pearson(&x1, &x3).abs() < 0.7);
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let d = labeled_numeric(
            vec![
                ("x1", x1),
                ("x2", x2),
                ("x3", x3),
                ("x4", x4),
            ],
            labels,
        );
        let fake = |name: &str, a: f64| UnivariateScore {
            feature: name.into(),
            ks: a,
            auc: a,
            passes: true,
        };
        let scores = vec![
            fake("x1", 0.9),
            fake("x2", 0.85),
            fake("x3", 0.8),
            fake("x4", 0.75),
        ];
        let narrow = correlation_select(&scores, &d, 0.7, CorrelationKind::Pearson).unwrap();
        let wide = correlation_select(&scores, &d, 0.8, CorrelationKind::Pearson).unwrap();
        assert_eq!(narrow.selected, ["x1", "x3", "x4"]);
        assert_eq!(wide.selected, ["x1", "x2"]);
        assert!(narrow.selected.len() > wide.selected.len());
    }

    #[test]
    fn csv_export_covers_every_candidate() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let labels: Vec<u8> = (0..600).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let signal: Vec<f64> = labels
            .iter()
            .map(|&y| {
                let z: f64 = StandardNormal.sample(&mut rng);
                2.0 * f64::from(y) + z
            })
            .collect();
        let noise: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
        let twin = signal.clone();
        let d = labeled_numeric(
            vec![("signal", signal), ("twin", twin), ("noise", noise)],
            labels,
        );
        let cfg = SelectConfig {
            auc_min: 0.57,
            ..SelectConfig::default()
        };
        let result = select_features(&d, &cfg).unwrap();
        let csv = result.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("low-power"));
        assert!(csv.contains("correlated-with"));
        assert_eq!(result.selected.len(), 1);
    }

    #[test]
    fn spearman_option_catches_monotone_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let base: Vec<f64> = (0..3000).map(|_| rng.random::<f64>() * 3.0).collect();
        let curved: Vec<f64> = base.iter().map(|&v| v.powi(5)).collect();
        let labels: Vec<u8> = (0..3000).map(|i| (i % 2) as u8).collect();
        let d = labeled_numeric(vec![("base", base), ("curved", curved)], labels);
        let fake = |name: &str, a: f64| UnivariateScore {
            feature: name.into(),
            ks: a,
            auc: a,
            passes: true,
        };
        let scores = vec![fake("base", 0.9), fake("curved", 0.8)];
        let spearman =
            correlation_select(&scores, &d, 0.95, CorrelationKind::Spearman).unwrap();
        assert_eq!(spearman.selected, ["base"], "perfect monotone tie should collapse");
        match &spearman.rejections[0].cause {
            RejectionCause::CorrelatedWith { correlation, .. } => {
                assert!((correlation - 1.0).abs() < 1e-9)
            }
            other => panic!("unexpected cause {other:?}"),
        }
    }
}
