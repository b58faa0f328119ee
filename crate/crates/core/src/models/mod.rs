//! Creditworthiness classifiers: L2-regularized logistic regression and
//! gradient-boosted trees, both emitting probabilities.
//!
//! Models consume dense feature matrices. [`design_matrix`] builds the
//! standard layout from a dataset (numerics raw, categoricals one-hot);
//! the logistic model standardizes numerics internally and trees are
//! invariant to monotone rescaling, so both kinds see equivalent inputs.

mod gbdt;
mod logistic;

pub use gbdt::GbdtModel;
pub use logistic::LogisticModel;

use thiserror::Error;

use crate::neural::Mat;
use crate::tabular::{Cell, ColumnKind, Dataset, TabularError};
use crate::transform::EncodedMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("labels and rows differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input width {found} does not match training width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("bad fit configuration: {0}")]
    BadConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Logistic,
    Gbdt,
}

/// Hyper-parameters for either model kind.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub kind: ModelKind,
    /// L2 strength on logistic weights (intercept unregularized).
    pub l2: f64,
    pub learning_rate: f64,
    /// Number of boosting stages; zero yields the prior-only model.
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Row fraction drawn (without replacement) per tree.
    pub subsample: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn logistic() -> FitConfig {
        FitConfig {
            kind: ModelKind::Logistic,
            l2: 1.0,
            learning_rate: 0.1,
            n_trees: 0,
            max_depth: 1,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }

    pub fn gbdt() -> FitConfig {
        FitConfig {
            kind: ModelKind::Gbdt,
            l2: 1.0,
            learning_rate: 0.1,
            n_trees: 200,
            max_depth: 3,
            min_samples_leaf: 20,
            subsample: 0.8,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> FitConfig {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.l2 > 0.0) || !(self.learning_rate > 0.0) {
            return Err(ModelError::BadConfig(
                "l2 and learning_rate must be positive".into(),
            ));
        }
        if self.max_depth < 1 || self.min_samples_leaf < 1 {
            return Err(ModelError::BadConfig(
                "max_depth and min_samples_leaf must be at least 1".into(),
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(ModelError::BadConfig(format!(
                "subsample {} outside (0, 1]",
                self.subsample
            )));
        }
        Ok(())
    }
}

fn check_training_input(x: &Mat, y: &[u8]) -> Result<(), ModelError> {
    if x.rows() != y.len() {
        return Err(ModelError::LengthMismatch(x.rows(), y.len()));
    }
    if x.rows() < 2 {
        return Err(ModelError::TooFewRows(x.rows()));
    }
    let pos = y.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}

/// Clamped log-odds to probability; output strictly inside (0, 1).
pub(crate) fn sigmoid(score: f64) -> f64 {
    let s = score.clamp(-36.0, 36.0);
    1.0 / (1.0 + (-s).exp())
}

/// Either fitted model, for callers that treat the two uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic(LogisticModel),
    Gbdt(GbdtModel),
}

impl Model {
    pub fn predict_proba(&self, x: &Mat) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Logistic(m) => m.predict_proba(x),
            Model::Gbdt(m) => m.predict_proba(x),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Model::Logistic(m) => m.to_text(),
            Model::Gbdt(m) => m.to_text(),
        }
    }

    pub fn from_text(text: &str) -> Result<Model, ModelError> {
        match text.lines().next().map(str::trim) {
            Some("logistic v1") => Ok(Model::Logistic(LogisticModel::from_text(text)?)),
            Some("gbdt v1") => Ok(Model::Gbdt(GbdtModel::from_text(text)?)),
            other => Err(ModelError::Parse {
                line: 1,
                msg: format!("unknown model header {other:?}"),
            }),
        }
    }
}

/// Builds the classifier feature matrix from a dataset: numeric columns as
/// raw values, categorical columns one-hot, label excluded. Also returns
/// the generated feature names (`col` or `col=category`).
pub fn design_matrix(d: &Dataset) -> Result<(Mat, Vec<String>), ModelError> {
    let schema = d.schema();
    let feature_cols = schema.feature_indices();
    if feature_cols.is_empty() {
        return Err(ModelError::BadConfig("dataset has no feature columns".into()));
    }
    let mut names = Vec::new();
    for &i in &feature_cols {
        let col = schema.column(i);
        match col.kind() {
            ColumnKind::Numeric => names.push(col.name().to_string()),
            ColumnKind::Categorical => {
                for c in col.categories() {
                    names.push(format!("{}={}", col.name(), c));
                }
            }
        }
    }
    let width = names.len();
    let mut values = vec![0.0f64; d.n_rows() * width];
    for (r, row) in d.rows().iter().enumerate() {
        let out = &mut values[r * width..(r + 1) * width];
        let mut j = 0;
        for &i in &feature_cols {
            let col = schema.column(i);
            match (col.kind(), row[i]) {
                (ColumnKind::Numeric, Cell::Num(v)) => {
                    out[j] = v;
                    j += 1;
                }
                (ColumnKind::Categorical, Cell::Cat(code)) => {
                    out[j + code as usize] = 1.0;
                    j += col.categories().len();
                }
                _ => unreachable!("dataset cells are validated against the schema"),
            }
        }
    }
    let mat = Mat::from_vec(d.n_rows(), width, values)
        .expect("sized to rows x width above");
    Ok((mat, names))
}

/// Reinterprets an encoded matrix as a plain feature matrix.
pub fn encoded_to_mat(m: &EncodedMatrix) -> Mat {
    Mat::from_vec(m.n_rows(), m.width(), m.values().to_vec())
        .expect("encoded matrix dimensions are consistent")
}

/// Fits a logistic model; `cfg.kind` must be `Logistic`.
pub fn fit_logistic(x: &Mat, y: &[u8], cfg: &FitConfig) -> Result<LogisticModel, ModelError> {
    if cfg.kind != ModelKind::Logistic {
        return Err(ModelError::BadConfig("config kind is not logistic".into()));
    }
    cfg.validate()?;
    check_training_input(x, y)?;
    logistic::fit(x, y, cfg)
}

/// Fits a boosted-tree model; `cfg.kind` must be `Gbdt`.
pub fn fit_gbdt(x: &Mat, y: &[u8], cfg: &FitConfig) -> Result<GbdtModel, ModelError> {
    if cfg.kind != ModelKind::Gbdt {
        return Err(ModelError::BadConfig("config kind is not gbdt".into()));
    }
    cfg.validate()?;
    check_training_input(x, y)?;
    gbdt::fit(x, y, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSchema, FeatureGroup, Schema};

    #[test]
    fn design_matrix_lays_out_numerics_and_one_hots() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("a", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical(
                "c",
                FeatureGroup::Fin,
                vec!["x".into(), "y".into(), "z".into()],
            )
            .unwrap(),
            ColumnSchema::label("y").unwrap(),
        ])
        .unwrap();
        let d = Dataset::new(
            schema,
            vec![
                vec![Cell::Num(1.5), Cell::Cat(2), Cell::Cat(0)],
                vec![Cell::Num(-2.0), Cell::Cat(0), Cell::Cat(1)],
            ],
        )
        .unwrap();
        let (m, names) = design_matrix(&d).unwrap();
        assert_eq!(names, ["a", "c=x", "c=y", "c=z"]);
        assert_eq!(m.row(0), [1.5, 0.0, 0.0, 1.0]);
        assert_eq!(m.row(1), [-2.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut cfg = FitConfig::gbdt();
        cfg.subsample = 0.0;
        assert!(cfg.validate().is_err());
        cfg.subsample = 1.2;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::logistic();
        cfg.l2 = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn training_input_needs_both_classes() {
        let x = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            check_training_input(&x, &[1, 1]),
            Err(ModelError::SingleClass)
        ));
        assert!(check_training_input(&x, &[0, 1]).is_ok());
    }
}
