//! Synthetic-data fidelity scoring: per-column distribution tests plus a
//! cross-validated detector that tries to tell real rows from synthetic.

use serde::{Deserialize, Serialize};

use crate::models::{fit_logistic, FitConfig};
use crate::neural::Mat;
use crate::seed;
use crate::tabular::{kfold_partition, ColumnKind, Dataset};
use crate::transform::{fit_transform_spec, ColumnSpan, EncodedMatrix};

use super::{cstest_quality, f_measure, kstest_quality, MetricError};

const DETECTION_MAX_MODES: usize = 5;

/// One column's fidelity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScore {
    pub column: String,
    pub value: f64,
}

/// Fidelity summary for one synthetic dataset against its real source:
/// KSTest per numeric column, CSTest per categorical column, their means,
/// and the detection score (closer to 1 means harder to distinguish).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub kstest_columns: Vec<ColumnScore>,
    pub cstest_columns: Vec<ColumnScore>,
    pub kstest: Option<f64>,
    pub cstest: Option<f64>,
    pub logistic_detection: f64,
    pub assumptions: Vec<String>,
}

impl QualityReport {
    /// One-line summary in the conventional column order.
    pub fn summary_csv(&self) -> String {
        let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "CSTest,KSTest,LogisticDetection\n{},{},{}\n",
            fmt(&self.cstest),
            fmt(&self.kstest),
            self.logistic_detection
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn demote_label(d: &Dataset) -> Result<Dataset, MetricError> {
    if d.schema().label_index().is_some() {
        d.label_as_feature()
            .map_err(|e| MetricError::Pipeline(e.to_string()))
    } else {
        Ok(d.clone())
    }
}

fn detector_features(encoded: &EncodedMatrix, spans: &[ColumnSpan]) -> Mat {
    let coords: Vec<(bool, Vec<usize>)> = spans
        .iter()
        .map(|s| match s {
            ColumnSpan::Numeric { scalar, .. } => (true, vec![*scalar]),
            ColumnSpan::Categorical { span } => (false, span.clone().skip(1).collect()),
        })
        .collect();
    let squares = coords.iter().filter(|(numeric, _)| *numeric).count();
    let crosses: usize = coords
        .iter()
        .enumerate()
        .map(|(i, (_, a))| {
            coords[i + 1..]
                .iter()
                .map(|(_, b)| a.len() * b.len())
                .sum::<usize>()
        })
        .sum();

    let width = encoded.width() + squares + crosses;
    let mut values = Vec::with_capacity(encoded.n_rows() * width);
    for r in 0..encoded.n_rows() {
        let row = encoded.row(r);
        values.extend_from_slice(row);
        for (i, (numeric, a)) in coords.iter().enumerate() {
            if *numeric {
                values.push(row[a[0]] * row[a[0]]);
            }
            for (_, b) in &coords[i + 1..] {
                for &p in a {
                    for &q in b {
                        values.push(row[p] * row[q]);
                    }
                }
            }
        }
    }
    Mat::from_vec(encoded.n_rows(), width, values).expect("augmented widths are consistent")
}

/// Trains a regularized logistic detector to separate real rows (class 0)
/// from synthetic rows (class 1) and returns one minus the out-of-fold
/// F-measure at threshold 0.5, averaged over folds. The detector sees the
/// per-column encoding plus squared numeric coordinates and cross-column
/// coordinate products, so it reacts to broken dependence structure as well
/// as to marginal mismatches.
pub fn logistic_detection(
    real: &Dataset,
    synth: &Dataset,
    folds: usize,
    master_seed: u64,
) -> Result<f64, MetricError> {
    if real.schema() != synth.schema() {
        return Err(MetricError::SchemaMismatch);
    }
    if real.n_rows() == 0 || synth.n_rows() == 0 {
        return Err(MetricError::Empty("logistic_detection dataset"));
    }
    if folds < 2 {
        return Err(MetricError::TooFewFolds { need: 2, got: folds });
    }

    let real = demote_label(real)?;
    let synth = demote_label(synth)?;
    let rows: Vec<_> = real
        .rows()
        .iter()
        .chain(synth.rows().iter())
        .cloned()
        .collect();
    let stack = Dataset::new(real.schema().clone(), rows)
        .map_err(|e| MetricError::Pipeline(e.to_string()))?;
    let labels: Vec<u8> = std::iter::repeat_n(0u8, real.n_rows())
        .chain(std::iter::repeat_n(1u8, synth.n_rows()))
        .collect();

    let spec = fit_transform_spec(&stack, DETECTION_MAX_MODES, seed::mix(master_seed, "detect-spec"))
        .map_err(|e| MetricError::Pipeline(e.to_string()))?;
    let encoded = spec
        .encode(&stack, seed::mix(master_seed, "detect-encode"))
        .map_err(|e| MetricError::Pipeline(e.to_string()))?;
    let x = detector_features(&encoded, &spec.column_spans());

    let assignment = kfold_partition(stack.n_rows(), folds, seed::mix(master_seed, "detect-folds"))
        .map_err(|e| MetricError::Pipeline(e.to_string()))?;

    let take = |idx: &[usize]| -> (Mat, Vec<u8>) {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
        let y: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
        (Mat::from_rows(&rows).expect("non-empty fold"), y)
    };

    let mut total = 0.0;
    for fold in 0..folds {
        let (train_x, train_y) = take(&assignment.train_indices(fold));
        let (val_x, val_y) = take(&assignment.val_indices(fold));
        let detector = fit_logistic(&train_x, &train_y, &FitConfig::logistic())
            .map_err(|e| MetricError::Pipeline(e.to_string()))?;
        let scores = detector
            .predict_proba(&val_x)
            .map_err(|e| MetricError::Pipeline(e.to_string()))?;
        let preds: Vec<u8> = scores.iter().map(|&p| u8::from(p >= 0.5)).collect();
        total += 1.0 - f_measure(&preds, &val_y)?;
    }
    Ok((total / folds as f64).clamp(0.0, 1.0))
}

/// Scores every column of `synth` against `real` and runs the detector.
pub fn quality_report(
    real: &Dataset,
    synth: &Dataset,
    folds: usize,
    master_seed: u64,
) -> Result<QualityReport, MetricError> {
    if real.schema() != synth.schema() {
        return Err(MetricError::SchemaMismatch);
    }
    let fetch_num = |d: &Dataset, name: &str| {
        d.numeric_column(name)
            .map_err(|e| MetricError::Pipeline(e.to_string()))
    };
    let fetch_cat = |d: &Dataset, name: &str| {
        d.categorical_column(name)
            .map_err(|e| MetricError::Pipeline(e.to_string()))
    };

    let mut kstest_columns = Vec::new();
    let mut cstest_columns = Vec::new();
    for col in real.schema().columns() {
        match col.kind() {
            ColumnKind::Numeric => {
                let value =
                    kstest_quality(&fetch_num(real, col.name())?, &fetch_num(synth, col.name())?)?;
                kstest_columns.push(ColumnScore {
                    column: col.name().to_string(),
                    value,
                });
            }
            ColumnKind::Categorical => {
                let value = cstest_quality(
                    &fetch_cat(real, col.name())?,
                    &fetch_cat(synth, col.name())?,
                    col.categories().len(),
                )?;
                cstest_columns.push(ColumnScore {
                    column: col.name().to_string(),
                    value,
                });
            }
        }
    }
    let mean = |scores: &[ColumnScore]| {
        if scores.is_empty() {
            None
        } else {
            Some(scores.iter().map(|c| c.value).sum::<f64>() / scores.len() as f64)
        }
    };

    Ok(QualityReport {
        kstest: mean(&kstest_columns),
        cstest: mean(&cstest_columns),
        kstest_columns,
        cstest_columns,
        logistic_detection: logistic_detection(real, synth, folds, master_seed)?,
        assumptions: vec![
            "logistic detection = 1 - out-of-fold F-measure of the synthetic class at threshold 0.5"
                .to_string(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::tabular::{Cell, ColumnSchema, FeatureGroup, Schema};

    fn mixed_schema() -> Schema {
        Schema::new(vec![
            ColumnSchema::numeric("amount", FeatureGroup::Fin).unwrap(),
            ColumnSchema::numeric("tenure", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical(
                "segment",
                FeatureGroup::SocInt,
                vec!["a".into(), "b".into(), "c".into()],
            )
            .unwrap(),
            ColumnSchema::label("default").unwrap(),
        ])
        .unwrap()
    }

    fn sample_rows(n: usize, shift: f64, seed: u64) -> Vec<Vec<Cell>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let amount = 3.0 * z0 + shift;
                let tenure = if rng.random::<f64>() < 0.5 { z1 - 4.0 } else { z1 + 4.0 } + shift;
                let seg = match rng.random::<f64>() {
                    v if v < 0.5 => 0,
                    v if v < 0.8 => 1,
                    _ => 2,
                };
                let label = u32::from(rng.random::<f64>() < 0.3);
                vec![
                    Cell::Num(amount),
                    Cell::Num(tenure),
                    Cell::Cat(seg),
                    Cell::Cat(label),
                ]
            })
            .collect()
    }

    #[test]
    fn exact_copy_is_hard_to_detect() {
        let real = Dataset::new(mixed_schema(), sample_rows(2000, 0.0, 31)).unwrap();
        let synth = real.clone();
        let score = logistic_detection(&real, &synth, 3, 7).unwrap();
        assert!(score >= 0.4, "copied data scored only {score}");
    }

    #[test]
    fn shifted_copy_is_trivially_detected() {
        let real = Dataset::new(mixed_schema(), sample_rows(800, 0.0, 33)).unwrap();
        let synth = Dataset::new(mixed_schema(), sample_rows(800, 100.0, 33)).unwrap();
        let score = logistic_detection(&real, &synth, 3, 7).unwrap();
        assert!(score <= 0.05, "separable stack scored {score}");
    }

    #[test]
    fn degenerate_repeated_row_stays_near_the_chance_plateau() {
        let row = vec![Cell::Num(1.0), Cell::Num(2.0), Cell::Cat(1), Cell::Cat(0)];
        let rows: Vec<_> = (0..200).map(|_| row.clone()).collect();
        let real = Dataset::new(mixed_schema(), rows.clone()).unwrap();
        let synth = Dataset::new(mixed_schema(), rows).unwrap();
        let score = logistic_detection(&real, &synth, 3, 7).unwrap();
        assert!(score >= 0.3, "degenerate stack scored {score}");
    }

    #[test]
    fn broken_dependence_is_detected_despite_matching_marginals() {
        let schema = || {
            Schema::new(vec![
                ColumnSchema::numeric("amount", FeatureGroup::Fin).unwrap(),
                ColumnSchema::numeric("tenure", FeatureGroup::Fin).unwrap(),
                ColumnSchema::categorical(
                    "segment",
                    FeatureGroup::SocInt,
                    vec!["a".into(), "b".into(), "c".into()],
                )
                .unwrap(),
                ColumnSchema::categorical(
                    "region",
                    FeatureGroup::SocInt,
                    vec!["n".into(), "s".into(), "w".into()],
                )
                .unwrap(),
            ])
            .unwrap()
        };
        let rows = |coupled: bool, seed: u64| -> Vec<Vec<Cell>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..2500)
                .map(|_| {
                    let z0: f64 = StandardNormal.sample(&mut rng);
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    let z1 = if coupled {
                        0.95 * z0 + (1.0 - 0.95f64 * 0.95).sqrt() * noise
                    } else {
                        noise
                    };
                    let c0 = rng.random_range(0..3u32);
                    let c1 = if coupled { c0 } else { rng.random_range(0..3u32) };
                    vec![Cell::Num(z0), Cell::Num(z1), Cell::Cat(c0), Cell::Cat(c1)]
                })
                .collect()
        };
        let real = Dataset::new(schema(), rows(true, 41)).unwrap();
        let synth = Dataset::new(schema(), rows(false, 42)).unwrap();
        let report = quality_report(&real, &synth, 3, 7).unwrap();
        assert!(
            report.kstest.unwrap() >= 0.95,
            "marginals were built to match, kstest {:?}",
            report.kstest
        );
        assert!(
            report.cstest.unwrap() >= 0.95,
            "marginals were built to match, cstest {:?}",
            report.cstest
        );
        assert!(
            report.logistic_detection <= 0.35,
            "dependence-only gap scored {}",
            report.logistic_detection
        );
    }

    #[test]
    fn mismatched_schemas_are_rejected() {
        let real = Dataset::new(mixed_schema(), sample_rows(50, 0.0, 1)).unwrap();
        let other = Schema::new(vec![
            ColumnSchema::numeric("amount", FeatureGroup::Fin).unwrap(),
            ColumnSchema::label("default").unwrap(),
        ])
        .unwrap();
        let synth = Dataset::new(
            other,
            vec![vec![Cell::Num(0.0), Cell::Cat(0)]; 50],
        )
        .unwrap();
        assert!(matches!(
            logistic_detection(&real, &synth, 3, 7),
            Err(MetricError::SchemaMismatch)
        ));
    }

    #[test]
    fn report_scores_identical_data_as_perfect() {
        let real = Dataset::new(mixed_schema(), sample_rows(900, 0.0, 35)).unwrap();
        let report = quality_report(&real, &real.clone(), 3, 11).unwrap();
        assert_eq!(report.kstest_columns.len(), 2);
        assert_eq!(report.cstest_columns.len(), 2);
        assert_eq!(report.kstest, Some(1.0));
        assert_eq!(report.cstest, Some(1.0));
        assert!(report.logistic_detection >= 0.35);
        for c in report.kstest_columns.iter().chain(&report.cstest_columns) {
            assert!((0.0..=1.0).contains(&c.value));
        }
    }

    #[test]
    fn report_flags_a_shifted_synthesis() {
        let real = Dataset::new(mixed_schema(), sample_rows(600, 0.0, 37)).unwrap();
        let synth = Dataset::new(mixed_schema(), sample_rows(600, 50.0, 38)).unwrap();
        let report = quality_report(&real, &synth, 3, 11).unwrap();
        assert!(report.kstest.unwrap() < 0.1, "kstest {:?}", report.kstest);
        assert!(report.logistic_detection <= 0.05);
        let csv = report.summary_csv();
        assert!(csv.starts_with("CSTest,KSTest,LogisticDetection\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
