//! Simulated two-year credit portfolio with known ground truth.
//!
//! Borrowers get three groups of features: financial columns drawn from
//! correlated multimodal mixtures (a few of them ordinal categoricals),
//! the node degree of a random social graph, and social-interaction
//! columns derived from degree and neighbourhood aggregates plus noise.
//! Default labels follow a logistic process over standardized drivers
//! with one pairwise interaction and one threshold effect, calibrated by
//! bisection to the configured base rate. Year 2 is re-sampled with
//! mixture-mean shifts and coefficient decay scaled by the drift
//! strength, so a zero-drift config reproduces the year-1 process
//! exactly. Everything is deterministic given the seed.

mod graph;

pub use graph::{degree_sequence, GraphModel};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{auc, ScoredSample};
use crate::seed;
use crate::tabular::{Cell, ColumnSchema, Dataset, FeatureGroup, Schema, TabularError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("degenerate simulation output: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Per-feature coefficient magnitudes fall off geometrically so the
/// financial group spans strong to near-noise univariate signal.
const FIN_COEF_DECAY: f64 = 0.78;
const SOC_COEF_DECAY: f64 = 0.9;
/// Observation noise on social-interaction columns, relative to the
/// unit-variance base signals.
const SOC_NOISE: f64 = 0.8;
/// Nonlinear score terms, relative to the financial signal strength.
const INTERACTION_WEIGHT: f64 = 0.55;
const THRESHOLD_WEIGHT: f64 = 1.2;
const THRESHOLD_CUT: f64 = 0.8;
/// At drift 1 a coefficient can lose at most half its magnitude.
const MAX_COEF_DECAY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_borrowers: usize,
    pub n_fin_features: usize,
    pub n_socint_features: usize,
    pub graph: GraphModel,
    /// Target share of defaulting borrowers, calibrated on year 1.
    pub base_rate: f64,
    pub fin_signal: f64,
    pub degree_signal: f64,
    pub socint_signal: f64,
    /// 0 means year 2 repeats the year-1 process; 1 is the strongest
    /// supported combination of covariate shift and coefficient decay.
    pub drift: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::fixture()
    }
}

impl SimConfig {
    /// The frozen benchmark portfolio: 20k borrowers per year, eight
    /// financial columns (two of them categorical), a sparse borrower
    /// graph with mean degree around ten, and enough drift that every
    /// model measurably degrades on the second year.
    pub fn fixture() -> SimConfig {
        SimConfig {
            n_borrowers: 20_000,
            n_fin_features: 8,
            n_socint_features: 8,
            graph: GraphModel::ErdosRenyi { p: 0.0005 },
            base_rate: 0.15,
            fin_signal: 1.1,
            degree_signal: 0.3,
            socint_signal: 0.4,
            drift: 0.5,
            seed: 20180119,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> SimConfig {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_borrowers < 2 {
            return Err(SimError::BadConfig(format!(
                "need at least 2 borrowers, got {}",
                self.n_borrowers
            )));
        }
        if self.n_fin_features == 0 || self.n_socint_features == 0 {
            return Err(SimError::BadConfig(
                "feature counts must be at least one per group".into(),
            ));
        }
        if !(self.base_rate > 0.01 && self.base_rate < 0.5) {
            return Err(SimError::BadConfig(format!(
                "base rate must lie in (0.01, 0.5), got {}",
                self.base_rate
            )));
        }
        for (name, v) in [
            ("fin_signal", self.fin_signal),
            ("degree_signal", self.degree_signal),
            ("socint_signal", self.socint_signal),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::BadConfig(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.drift.is_finite() || !(0.0..=1.0).contains(&self.drift) {
            return Err(SimError::BadConfig(format!(
                "drift must lie in [0, 1], got {}",
                self.drift
            )));
        }
        self.graph.validate(self.n_borrowers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnValue {
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTruth {
    pub left: String,
    pub right: String,
    pub weight_year1: f64,
    pub weight_year2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTruth {
    pub column: String,
    pub cut: f64,
    pub weight_year1: f64,
    pub weight_year2: f64,
}

/// Ground truth of the label process, recorded so experiments can be
/// checked against what the generator actually did.
///
/// Coefficients apply to standardized quantities (z-scored numeric
/// columns, ordinal steps for categorical columns, log-degree z-scores,
/// unit-variance social bases), not raw column units; signs carry over
/// to the raw columns. Feature AUCs are univariate on year 1, oriented
/// so 0.5 means no signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub configured_base_rate: f64,
    pub intercept: f64,
    pub realized_default_rate_year1: f64,
    pub realized_default_rate_year2: f64,
    pub coefficients_year1: Vec<ColumnValue>,
    pub coefficients_year2: Vec<ColumnValue>,
    pub interaction: Option<InteractionTruth>,
    pub threshold: Option<ThresholdTruth>,
    pub feature_aucs_year1: Vec<ColumnValue>,
    pub notes: Vec<String>,
}

impl SimTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serializes")
    }

    pub fn from_json(text: &str) -> Result<SimTruth, SimError> {
        serde_json::from_str(text)
            .map_err(|e| SimError::BadConfig(format!("truth file does not parse: {e}")))
    }
}

struct ModeShape {
    weight: f64,
    mean: f64,
    std: f64,
    mean_shift: f64,
}

enum FinKind {
    Numeric { modes: Vec<ModeShape> },
    Categorical { cuts: (f64, f64), cut_shift: f64 },
}

struct FinShape {
    kind: FinKind,
    loading: f64,
    coefficient: f64,
    decay: f64,
}

#[derive(Clone, Copy)]
enum SocBase {
    OwnDegree,
    NeighborDegree,
    SharedFactor,
}

struct SocShape {
    base: SocBase,
    coefficient: f64,
    shift: f64,
    decay: f64,
}

struct Shapes {
    fin: Vec<FinShape>,
    soc: Vec<SocShape>,
    degree_coefficient: f64,
    degree_decay: f64,
    interaction_decay: f64,
    threshold_decay: f64,
}

fn draw_shapes(cfg: &SimConfig) -> Shapes {
    let mut shape_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, "shape"));
    let mut drift_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, "drift"));

    let mut fin = Vec::with_capacity(cfg.n_fin_features);
    for j in 0..cfg.n_fin_features {
        let magnitude = cfg.fin_signal * FIN_COEF_DECAY.powi(j as i32);
        let sign = if shape_rng.random::<f64>() < 0.3 { -1.0 } else { 1.0 };
        let loading = shape_rng.random_range(0.35..0.65);
        let kind = if j % 4 == 3 {
            let jitter_lo = shape_rng.random_range(-0.15..0.15);
            let jitter_hi = shape_rng.random_range(-0.15..0.15);
            let cut_shift = 0.45 * standard_normal(&mut drift_rng);
            FinKind::Categorical {
                cuts: (-0.43 + jitter_lo, 0.43 + jitter_hi),
                cut_shift,
            }
        } else {
            let n_modes = if shape_rng.random::<f64>() < 0.5 { 2 } else { 3 };
            let mut raw_weights = Vec::with_capacity(n_modes);
            for _ in 0..n_modes {
                raw_weights.push(shape_rng.random_range(0.35..1.0));
            }
            let total: f64 = raw_weights.iter().sum();
            let base_mean = shape_rng.random_range(-3.5..-1.5);
            let mut mean = base_mean;
            let mut modes = Vec::with_capacity(n_modes);
            for (m, raw) in raw_weights.into_iter().enumerate() {
                if m > 0 {
                    mean += shape_rng.random_range(1.8..3.0);
                }
                let std = shape_rng.random_range(0.5..0.9);
                let mean_shift = std * standard_normal(&mut drift_rng);
                modes.push(ModeShape {
                    weight: raw / total,
                    mean,
                    std,
                    mean_shift,
                });
            }
            FinKind::Numeric { modes }
        };
        fin.push(FinShape {
            kind,
            loading,
            coefficient: sign * magnitude,
            decay: drift_rng.random_range(0.5..1.0),
        });
    }

    let mut soc = Vec::with_capacity(cfg.n_socint_features);
    for k in 0..cfg.n_socint_features {
        let base = match k % 3 {
            0 => SocBase::OwnDegree,
            1 => SocBase::NeighborDegree,
            _ => SocBase::SharedFactor,
        };
        let sign = if shape_rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        soc.push(SocShape {
            base,
            coefficient: sign * cfg.socint_signal * SOC_COEF_DECAY.powi(k as i32),
            shift: 0.5 * standard_normal(&mut drift_rng),
            decay: drift_rng.random_range(0.5..1.0),
        });
    }

    Shapes {
        fin,
        soc,
        degree_coefficient: cfg.degree_signal,
        degree_decay: drift_rng.random_range(0.5..1.0),
        interaction_decay: drift_rng.random_range(0.5..1.0),
        threshold_decay: drift_rng.random_range(0.5..1.0),
    }
}

fn build_schema(cfg: &SimConfig, shapes: &Shapes) -> Result<Schema, SimError> {
    let mut columns = Vec::new();
    for (j, shape) in shapes.fin.iter().enumerate() {
        let name = format!("fin_{j:02}");
        columns.push(match shape.kind {
            FinKind::Numeric { .. } => ColumnSchema::numeric(name, FeatureGroup::Fin)?,
            FinKind::Categorical { .. } => ColumnSchema::categorical(
                name,
                FeatureGroup::Fin,
                vec!["low".into(), "mid".into(), "high".into()],
            )?,
        });
    }
    columns.push(ColumnSchema::numeric("degree", FeatureGroup::Degree)?);
    for k in 0..cfg.n_socint_features {
        columns.push(ColumnSchema::numeric(
            format!("socint_{k:02}"),
            FeatureGroup::SocInt,
        )?);
    }
    columns.push(ColumnSchema::label("default")?);
    Ok(Schema::new(columns)?)
}

struct YearFrame {
    /// Feature cells per row, label cell still missing.
    rows: Vec<Vec<Cell>>,
    /// Label-process score per row, before the intercept.
    score: Vec<f64>,
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn zscores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd < 1e-12 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

fn year_coefficient(base: f64, decay: f64, drift: f64) -> f64 {
    base * (1.0 - MAX_COEF_DECAY * drift * decay)
}

/// Population mean and standard deviation of a shifted mixture, so the
/// linear score term can act on the standardized column analytically.
fn mixture_moments(modes: &[ModeShape], drift: f64) -> (f64, f64) {
    let mean: f64 = modes
        .iter()
        .map(|m| m.weight * (m.mean + drift * m.mean_shift))
        .sum();
    let second: f64 = modes
        .iter()
        .map(|m| {
            let mu = m.mean + drift * m.mean_shift;
            m.weight * (mu * mu + m.std * m.std)
        })
        .sum();
    (mean, (second - mean * mean).sqrt().max(1e-9))
}

fn synth_year(cfg: &SimConfig, shapes: &Shapes, year: u8) -> Result<YearFrame, SimError> {
    let n = cfg.n_borrowers;
    let drift = if year == 1 { 0.0 } else { cfg.drift };
    let hood = graph::sample_neighborhood(
        n,
        &cfg.graph,
        seed::mix(cfg.seed, &format!("graph-y{year}")),
    )?;
    let log_degree: Vec<f64> = hood.degrees.iter().map(|&d| f64::from(d).ln_1p()).collect();
    let degree_z = zscores(&log_degree);
    let neighbor_log: Vec<f64> = hood
        .mean_neighbor_degree
        .iter()
        .map(|&d| d.ln_1p())
        .collect();
    let neighbor_z = zscores(&neighbor_log);

    let mut factor_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("factor-y{year}")));
    let factors: Vec<f64> = (0..n).map(|_| standard_normal(&mut factor_rng)).collect();

    let mut fin_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("fin-y{year}")));
    let mut soc_rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("socint-y{year}")));

    let fin_moments: Vec<Option<(f64, f64)>> = shapes
        .fin
        .iter()
        .map(|shape| match &shape.kind {
            FinKind::Numeric { modes } => Some(mixture_moments(modes, drift)),
            FinKind::Categorical { .. } => None,
        })
        .collect();

    let width = shapes.fin.len() + 1 + shapes.soc.len() + 1;
    let mut rows = Vec::with_capacity(n);
    let mut score = vec![0.0; n];

    for i in 0..n {
        let u = factors[i];
        let mut row = Vec::with_capacity(width);
        let mut drivers = Vec::with_capacity(shapes.fin.len());
        for (shape, moments) in shapes.fin.iter().zip(&fin_moments) {
            let beta = year_coefficient(shape.coefficient, shape.decay, drift);
            match &shape.kind {
                FinKind::Numeric { modes } => {
                    let pick: f64 = fin_rng.random();
                    let eps = standard_normal(&mut fin_rng);
                    let w = shape.loading * u + (1.0 - shape.loading.powi(2)).sqrt() * eps;
                    let mut acc = 0.0;
                    let mut chosen = modes.len() - 1;
                    for (m, mode) in modes.iter().enumerate() {
                        acc += mode.weight;
                        if pick < acc {
                            chosen = m;
                            break;
                        }
                    }
                    let mode = &modes[chosen];
                    let x = mode.mean + drift * mode.mean_shift + mode.std * w;
                    row.push(Cell::Num(x));
                    let (mean, sd) = moments.expect("numeric shapes carry moments");
                    let z = (x - mean) / sd;
                    score[i] += beta * z;
                    drivers.push(z);
                }
                FinKind::Categorical { cuts, cut_shift } => {
                    let eps = standard_normal(&mut fin_rng);
                    let w = shape.loading * u + (1.0 - shape.loading.powi(2)).sqrt() * eps;
                    let lo = cuts.0 + drift * cut_shift;
                    let hi = cuts.1 + drift * cut_shift;
                    let cat = if w < lo {
                        0
                    } else if w < hi {
                        1
                    } else {
                        2
                    };
                    row.push(Cell::Cat(cat));
                    let step = f64::from(cat) - 1.0;
                    score[i] += beta * step;
                    drivers.push(step);
                }
            }
        }

        row.push(Cell::Num(f64::from(hood.degrees[i])));
        score[i] += year_coefficient(shapes.degree_coefficient, shapes.degree_decay, drift)
            * degree_z[i];

        for shape in &shapes.soc {
            let base = match shape.base {
                SocBase::OwnDegree => degree_z[i],
                SocBase::NeighborDegree => neighbor_z[i],
                SocBase::SharedFactor => {
                    let eta = standard_normal(&mut soc_rng);
                    (0.6 * u + 0.4 * eta) / (0.6f64.powi(2) + 0.4f64.powi(2)).sqrt()
                }
            };
            let eps = standard_normal(&mut soc_rng);
            let value = base + SOC_NOISE * eps + drift * shape.shift;
            row.push(Cell::Num(value));
            score[i] += year_coefficient(shape.coefficient, shape.decay, drift) * base;
        }

        if drivers.len() >= 2 {
            let w = year_coefficient(
                INTERACTION_WEIGHT * cfg.fin_signal,
                shapes.interaction_decay,
                drift,
            );
            score[i] += w * drivers[0] * drivers[1];
        }
        if drivers.len() >= 3 {
            let w = year_coefficient(
                THRESHOLD_WEIGHT * cfg.fin_signal,
                shapes.threshold_decay,
                drift,
            );
            if drivers[2] > THRESHOLD_CUT {
                score[i] += w;
            }
        }

        rows.push(row);
    }

    Ok(YearFrame { rows, score })
}

/// Solves for the intercept that makes the mean default probability hit
/// the configured base rate on the year-1 scores.
fn calibrate_intercept(scores: &[f64], target: f64) -> f64 {
    let n = scores.len() as f64;
    let mut lo = -40.0;
    let mut hi = 40.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let rate = scores.iter().map(|&s| sigmoid(mid + s)).sum::<f64>() / n;
        if rate < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn draw_labels(cfg: &SimConfig, intercept: f64, frame: &mut YearFrame, year: u8) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("labels-y{year}")));
    let mut positives = 0usize;
    for (row, &s) in frame.rows.iter_mut().zip(&frame.score) {
        let y = u32::from(rng.random::<f64>() < sigmoid(intercept + s));
        positives += y as usize;
        row.push(Cell::Cat(y));
    }
    positives as f64 / frame.rows.len() as f64
}

fn feature_aucs(data: &Dataset) -> Result<Vec<ColumnValue>, SimError> {
    let labels = data.labels()?;
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(SimError::Degenerate(
            "year-1 labels collapsed to a single class".into(),
        ));
    }
    let schema = data.schema();
    let mut out = Vec::new();
    for idx in schema.feature_indices() {
        let col = schema.column(idx);
        // Squash into [0,1] with a strictly increasing map; AUC only sees
        // ranks, so the value is unchanged.
        let scores: Vec<f64> = data
            .rows()
            .iter()
            .map(|row| match row[idx] {
                Cell::Num(v) => v.atan() / std::f64::consts::PI + 0.5,
                Cell::Cat(c) => f64::from(c).atan() / std::f64::consts::PI + 0.5,
            })
            .collect();
        let sample = ScoredSample::new(scores, labels.clone())
            .map_err(|e| SimError::Degenerate(e.to_string()))?;
        let raw = auc(&sample).map_err(|e| SimError::Degenerate(e.to_string()))?;
        out.push(ColumnValue {
            column: col.name().to_string(),
            value: raw.max(1.0 - raw),
        });
    }
    Ok(out)
}

fn coefficient_table(shapes: &Shapes, schema: &Schema, drift: f64) -> Vec<ColumnValue> {
    let mut out = Vec::new();
    let mut fin_iter = shapes.fin.iter();
    let mut soc_iter = shapes.soc.iter();
    for idx in schema.feature_indices() {
        let col = schema.column(idx);
        let value = match col.group() {
            FeatureGroup::Fin => {
                let shape = fin_iter.next().expect("one shape per fin column");
                year_coefficient(shape.coefficient, shape.decay, drift)
            }
            FeatureGroup::Degree => {
                year_coefficient(shapes.degree_coefficient, shapes.degree_decay, drift)
            }
            FeatureGroup::SocInt => {
                let shape = soc_iter.next().expect("one shape per socint column");
                year_coefficient(shape.coefficient, shape.decay, drift)
            }
            FeatureGroup::Label | FeatureGroup::Other => unreachable!("feature columns only"),
        };
        out.push(ColumnValue {
            column: col.name().to_string(),
            value,
        });
    }
    out
}

/// Generates both portfolio years and the ground truth behind them.
pub fn generate(cfg: &SimConfig) -> Result<(Dataset, Dataset, SimTruth), SimError> {
    cfg.validate()?;
    let shapes = draw_shapes(cfg);
    let schema = build_schema(cfg, &shapes)?;

    let mut year1 = synth_year(cfg, &shapes, 1)?;
    let mut year2 = synth_year(cfg, &shapes, 2)?;
    let intercept = calibrate_intercept(&year1.score, cfg.base_rate);
    let rate1 = draw_labels(cfg, intercept, &mut year1, 1);
    let rate2 = draw_labels(cfg, intercept, &mut year2, 2);

    let year1 = Dataset::new(schema.clone(), year1.rows)?;
    let year2 = Dataset::new(schema.clone(), year2.rows)?;

    let fin_names: Vec<String> = schema
        .columns()
        .iter()
        .filter(|c| c.group() == FeatureGroup::Fin)
        .map(|c| c.name().to_string())
        .collect();
    let interaction = (fin_names.len() >= 2).then(|| InteractionTruth {
        left: fin_names[0].clone(),
        right: fin_names[1].clone(),
        weight_year1: INTERACTION_WEIGHT * cfg.fin_signal,
        weight_year2: year_coefficient(
            INTERACTION_WEIGHT * cfg.fin_signal,
            shapes.interaction_decay,
            cfg.drift,
        ),
    });
    let threshold = (fin_names.len() >= 3).then(|| ThresholdTruth {
        column: fin_names[2].clone(),
        cut: THRESHOLD_CUT,
        weight_year1: THRESHOLD_WEIGHT * cfg.fin_signal,
        weight_year2: year_coefficient(
            THRESHOLD_WEIGHT * cfg.fin_signal,
            shapes.threshold_decay,
            cfg.drift,
        ),
    });

    let truth = SimTruth {
        configured_base_rate: cfg.base_rate,
        intercept,
        realized_default_rate_year1: rate1,
        realized_default_rate_year2: rate2,
        coefficients_year1: coefficient_table(&shapes, &schema, 0.0),
        coefficients_year2: coefficient_table(&shapes, &schema, cfg.drift),
        interaction,
        threshold,
        feature_aucs_year1: feature_aucs(&year1)?,
        notes: vec![
            "financial numeric columns are 2-3 mode gaussian mixtures whose within-mode \
             deviations share a per-borrower factor; linear coefficients act on the \
             standardized column values"
                .into(),
            "categorical financial columns cut the same kind of deviation into three ordered \
             levels with a linear level effect"
                .into(),
            "social-interaction columns are standardized log-degree, neighbour mean degree, or \
             shared-factor signals plus observation noise"
                .into(),
            "interaction and threshold terms act on the hidden deviations of the first \
             financial columns, so tree models can exploit structure linear models miss"
                .into(),
            "year 2 shifts mixture means and category cuts, adds measurement offsets to \
             social columns, and decays every coefficient, all scaled by the drift strength"
                .into(),
        ],
    };

    Ok((year1, year2, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{design_matrix, fit_gbdt, fit_logistic, FitConfig};
    use crate::tabular::Provenance;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            n_borrowers: 6000,
            graph: GraphModel::ErdosRenyi { p: 0.0017 },
            seed,
            ..SimConfig::fixture()
        }
    }

    #[test]
    fn generation_is_deterministic_and_years_share_the_schema() {
        let cfg = small(5);
        let (a1, a2, at) = generate(&cfg).unwrap();
        let (b1, b2, bt) = generate(&cfg).unwrap();
        assert_eq!(a1, b1);
        assert_eq!(a2, b2);
        assert_eq!(at, bt);
        assert_eq!(a1.schema(), a2.schema());
        assert_eq!(a1.provenance(), Provenance::Real);
        assert_eq!(a1.n_rows(), cfg.n_borrowers);
        assert_eq!(a2.n_rows(), cfg.n_borrowers);

        let other = generate(&cfg.clone().with_seed(6)).unwrap();
        assert_ne!(a1, other.0);
    }

    #[test]
    fn fixture_has_mixed_column_kinds_and_all_groups() {
        let cfg = SimConfig::fixture();
        let shapes = draw_shapes(&cfg);
        let schema = build_schema(&cfg, &shapes).unwrap();
        let fin_cats = schema
            .columns()
            .iter()
            .filter(|c| c.group() == FeatureGroup::Fin && c.kind() == ColumnKind::Categorical)
            .count();
        assert_eq!(fin_cats, 2);
        for group in [
            FeatureGroup::Fin,
            FeatureGroup::Degree,
            FeatureGroup::SocInt,
            FeatureGroup::Label,
        ] {
            assert!(schema.columns().iter().any(|c| c.group() == group));
        }
    }

    #[test]
    fn realized_rate_tracks_the_configured_base_rate() {
        let (_, _, truth) = generate(&small(11)).unwrap();
        let rel = (truth.realized_default_rate_year1 - 0.15).abs() / 0.15;
        assert!(rel < 0.2, "year-1 rate {} off target", truth.realized_default_rate_year1);
        assert!(truth.realized_default_rate_year2 > 0.02);
        assert!(truth.realized_default_rate_year2 < 0.5);
    }

    #[test]
    fn zero_signal_leaves_every_feature_at_chance() {
        let cfg = SimConfig {
            n_borrowers: 20_000,
            fin_signal: 0.0,
            degree_signal: 0.0,
            socint_signal: 0.0,
            graph: GraphModel::ErdosRenyi { p: 0.0005 },
            ..SimConfig::fixture()
        };
        let (_, _, truth) = generate(&cfg).unwrap();
        for entry in &truth.feature_aucs_year1 {
            assert!(
                (entry.value - 0.5).abs() <= 0.02,
                "{} has auc {} under zero signal",
                entry.column,
                entry.value
            );
        }
    }

    #[test]
    fn zero_drift_keeps_next_year_performance_flat() {
        let cfg = SimConfig {
            n_borrowers: 20_000,
            drift: 0.0,
            graph: GraphModel::ErdosRenyi { p: 0.0005 },
            ..SimConfig::fixture()
        };
        let (year1, year2, _) = generate(&cfg).unwrap();
        let (x1, _) = design_matrix(&year1).unwrap();
        let y1 = year1.labels().unwrap();
        let train_rows: Vec<Vec<f64>> = (0..10_000).map(|i| x1.row(i).to_vec()).collect();
        let train_x = crate::neural::Mat::from_rows(&train_rows).unwrap();
        let train_y = &y1[..10_000];
        let model = fit_logistic(&train_x, train_y, &FitConfig::logistic()).unwrap();

        let hold_rows: Vec<Vec<f64>> = (10_000..20_000).map(|i| x1.row(i).to_vec()).collect();
        let hold_x = crate::neural::Mat::from_rows(&hold_rows).unwrap();
        let same = auc(&ScoredSample::new(
            model.predict_proba(&hold_x).unwrap(),
            y1[10_000..].to_vec(),
        )
        .unwrap())
        .unwrap();

        let (x2, _) = design_matrix(&year2).unwrap();
        let next = auc(&ScoredSample::new(
            model.predict_proba(&x2).unwrap(),
            year2.labels().unwrap(),
        )
        .unwrap())
        .unwrap();

        assert!(
            (same - next).abs() <= 0.02,
            "no-drift AUC moved from {same} to {next}"
        );
    }

    #[test]
    fn fixture_lands_in_the_reference_regime() {
        let (year1, year2, truth) = generate(&SimConfig::fixture()).unwrap();

        let fin_aucs: Vec<f64> = truth
            .feature_aucs_year1
            .iter()
            .filter(|c| c.column.starts_with("fin_"))
            .map(|c| c.value)
            .collect();
        let lo = fin_aucs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fin_aucs.iter().cloned().fold(0.0, f64::max);
        assert!(
            lo >= 0.50 && lo <= 0.60,
            "weakest fin univariate auc {lo} outside the intended floor"
        );
        assert!(
            hi >= 0.62 && hi <= 0.76,
            "strongest fin univariate auc {hi} outside the intended band"
        );

        let (x1, _) = design_matrix(&year1).unwrap();
        let y1 = year1.labels().unwrap();
        let n_train = 14_000;
        let train_rows: Vec<Vec<f64>> = (0..n_train).map(|i| x1.row(i).to_vec()).collect();
        let train_x = crate::neural::Mat::from_rows(&train_rows).unwrap();
        let model = fit_gbdt(&train_x, &y1[..n_train], &FitConfig::gbdt()).unwrap();

        let hold_rows: Vec<Vec<f64>> = (n_train..20_000).map(|i| x1.row(i).to_vec()).collect();
        let hold_x = crate::neural::Mat::from_rows(&hold_rows).unwrap();
        let same_year = auc(&ScoredSample::new(
            model.predict_proba(&hold_x).unwrap(),
            y1[n_train..].to_vec(),
        )
        .unwrap())
        .unwrap();
        assert!(
            (0.80..=0.92).contains(&same_year),
            "full-model gbdt holdout auc {same_year} outside the reference band"
        );

        let (x2, _) = design_matrix(&year2).unwrap();
        let next_year = auc(&ScoredSample::new(
            model.predict_proba(&x2).unwrap(),
            year2.labels().unwrap(),
        )
        .unwrap())
        .unwrap();
        assert!(
            same_year - next_year >= 0.01,
            "drifted year should cost at least a point of auc, got {same_year} -> {next_year}"
        );
    }

    #[test]
    fn logistic_fit_recovers_strong_coefficient_signs() {
        let (year1, _, truth) = generate(&small(23)).unwrap();
        let (x, names) = design_matrix(&year1).unwrap();
        let y = year1.labels().unwrap();
        let model = fit_logistic(&x, &y, &FitConfig::logistic()).unwrap();
        let weights = model.weights();

        for coef in &truth.coefficients_year1 {
            if coef.value.abs() < 0.25 || !coef.column.starts_with("fin_") {
                continue;
            }
            let Some(pos) = names.iter().position(|n| n == &coef.column) else {
                continue;
            };
            assert_eq!(
                weights[pos].signum(),
                coef.value.signum(),
                "column {} fitted {} against true {}",
                coef.column,
                weights[pos],
                coef.value
            );
        }
    }

    #[test]
    fn network_only_features_sit_in_a_weak_regime() {
        let cfg = SimConfig {
            n_borrowers: 12_000,
            graph: GraphModel::ErdosRenyi { p: 0.00085 },
            ..SimConfig::fixture()
        };
        let (year1, _, _) = generate(&cfg).unwrap();
        let keep: Vec<String> = year1
            .schema()
            .columns()
            .iter()
            .filter(|c| {
                matches!(
                    c.group(),
                    FeatureGroup::Degree | FeatureGroup::SocInt | FeatureGroup::Label
                )
            })
            .map(|c| c.name().to_string())
            .collect();
        let network = year1.select_columns(&keep).unwrap();
        let (x, _) = design_matrix(&network).unwrap();
        let y = network.labels().unwrap();
        let n_train = 8000;
        let train_rows: Vec<Vec<f64>> = (0..n_train).map(|i| x.row(i).to_vec()).collect();
        let train_x = crate::neural::Mat::from_rows(&train_rows).unwrap();
        let model = fit_gbdt(&train_x, &y[..n_train], &FitConfig::gbdt()).unwrap();
        let hold_rows: Vec<Vec<f64>> = (n_train..12_000).map(|i| x.row(i).to_vec()).collect();
        let hold_x = crate::neural::Mat::from_rows(&hold_rows).unwrap();
        let score = auc(&ScoredSample::new(
            model.predict_proba(&hold_x).unwrap(),
            y[n_train..].to_vec(),
        )
        .unwrap())
        .unwrap();
        assert!(
            (0.56..=0.70).contains(&score),
            "network-only auc {score} outside the weak-signal band"
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_rate = SimConfig {
            base_rate: 0.6,
            ..SimConfig::fixture()
        };
        assert!(matches!(generate(&bad_rate), Err(SimError::BadConfig(_))));

        let bad_counts = SimConfig {
            n_fin_features: 0,
            ..SimConfig::fixture()
        };
        assert!(bad_counts.validate().is_err());

        let bad_drift = SimConfig {
            drift: 1.5,
            ..SimConfig::fixture()
        };
        assert!(bad_drift.validate().is_err());

        let bad_graph = SimConfig {
            graph: GraphModel::ErdosRenyi { p: 1.2 },
            ..SimConfig::fixture()
        };
        assert!(bad_graph.validate().is_err());
    }

    #[test]
    fn truth_json_round_trips() {
        let (_, _, truth) = generate(&small(31)).unwrap();
        let text = truth.to_json();
        let back = SimTruth::from_json(&text).unwrap();
        assert_eq!(truth, back);
        assert!(truth.interaction.is_some());
        assert!(truth.threshold.is_some());
        assert_eq!(
            truth.coefficients_year1.len(),
            truth.coefficients_year2.len()
        );
        assert!(!truth.notes.is_empty());
    }
}
