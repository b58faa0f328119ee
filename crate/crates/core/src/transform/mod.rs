//! Invertible encoding between datasets and dense numeric matrices.
//!
//! Numeric columns get mode-specific normalization: a Gaussian mixture is
//! fitted per column, each value is assigned to a mode (sampled by
//! posterior responsibility), and the cell becomes a scalar
//! `alpha = (x - mean) / (scale_factor * std)` clipped to [-1, 1] plus a
//! one-hot mode indicator. Categorical columns become plain one-hot spans.
//! The decode direction inverts both, taking argmax over soft spans so
//! generator output can pass through unchanged.

mod gmm;

pub use gmm::{fit_modes, Mode, STD_FLOOR, WEIGHT_FLOOR};

use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::seed;
use crate::tabular::{Cell, ColumnKind, Dataset, Schema, TabularError};

pub const SCALE_FACTOR: f64 = 4.0;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("dataset has no feature columns to encode")]
    NoFeatureColumns,
    #[error("max_modes must be at least 1")]
    BadMaxModes,
    #[error("dataset is missing column {0:?}")]
    MissingColumn(String),
    #[error("column {0:?} does not match the fitted encoder")]
    ColumnMismatch(String),
    #[error("encoded width {found} does not match the fitted width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("encoded matrix is malformed: {0}")]
    BadMatrix(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Per-column encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    /// Mode-specific normalization: one scalar plus a one-hot over modes.
    Modes(Vec<Mode>),
    /// One-hot over the column's schema categories.
    OneHot,
}

/// Where a column lands in the encoded vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnSpan {
    Numeric { scalar: usize, modes: Range<usize> },
    Categorical { span: Range<usize> },
}

impl ColumnSpan {
    pub fn range(&self) -> Range<usize> {
        match self {
            ColumnSpan::Numeric { scalar, modes } => *scalar..modes.end,
            ColumnSpan::Categorical { span } => span.clone(),
        }
    }
}

/// A fitted, immutable encoding of one schema's feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    schema: Schema,
    encoders: Vec<Encoder>,
    starts: Vec<usize>,
    width: usize,
    max_modes: usize,
}

/// Dense row-major matrix of encoded rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    n_rows: usize,
    width: usize,
    values: Vec<f64>,
}

impl EncodedMatrix {
    pub fn new(n_rows: usize, width: usize, values: Vec<f64>) -> Result<Self, TransformError> {
        if values.len() != n_rows * width {
            return Err(TransformError::BadMatrix(format!(
                "{} values for {} rows of width {}",
                values.len(),
                n_rows,
                width
            )));
        }
        Ok(EncodedMatrix {
            n_rows,
            width,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn column_len(encoder: &Encoder, schema: &Schema, idx: usize) -> usize {
    match encoder {
        Encoder::Modes(modes) => 1 + modes.len(),
        Encoder::OneHot => schema.column(idx).categories().len(),
    }
}

/// Fits one encoder per non-label column.
///
/// Numeric columns get a Gaussian-mixture fit with up to `max_modes`
/// components (BIC-selected, weight-floor pruned); categorical columns
/// one-hot against their schema categories. Deterministic in
/// `(d, max_modes, seed)`.
pub fn fit_transform_spec(
    d: &Dataset,
    max_modes: usize,
    seed: u64,
) -> Result<TransformSpec, TransformError> {
    if d.n_rows() == 0 {
        return Err(TransformError::EmptyDataset);
    }
    if max_modes < 1 {
        return Err(TransformError::BadMaxModes);
    }
    let feature_cols: Vec<usize> = d.schema().feature_indices();
    if feature_cols.is_empty() {
        return Err(TransformError::NoFeatureColumns);
    }

    let columns = feature_cols
        .iter()
        .map(|&i| d.schema().column(i).clone())
        .collect();
    let schema = Schema::new(columns)?;

    let mut encoders = Vec::with_capacity(schema.len());
    for col in schema.columns() {
        match col.kind() {
            ColumnKind::Numeric => {
                let values = d.numeric_column(col.name())?;
                let modes = gmm::fit_modes(
                    &values,
                    max_modes,
                    seed::mix(seed, &format!("fit-{}", col.name())),
                );
                encoders.push(Encoder::Modes(modes));
            }
            ColumnKind::Categorical => encoders.push(Encoder::OneHot),
        }
    }

    Ok(TransformSpec::assemble(schema, encoders, max_modes))
}

impl TransformSpec {
    fn assemble(schema: Schema, encoders: Vec<Encoder>, max_modes: usize) -> TransformSpec {
        let mut starts = Vec::with_capacity(encoders.len());
        let mut width = 0;
        for (i, e) in encoders.iter().enumerate() {
            starts.push(width);
            width += column_len(e, &schema, i);
        }
        TransformSpec {
            schema,
            encoders,
            starts,
            width,
            max_modes,
        }
    }

    /// Schema of the encoded feature columns (label excluded at fit time).
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn encoders(&self) -> &[Encoder] {
        &self.encoders
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn max_modes(&self) -> usize {
        self.max_modes
    }

    pub fn column_spans(&self) -> Vec<ColumnSpan> {
        self.encoders
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let start = self.starts[i];
                match e {
                    Encoder::Modes(modes) => ColumnSpan::Numeric {
                        scalar: start,
                        modes: start + 1..start + 1 + modes.len(),
                    },
                    Encoder::OneHot => ColumnSpan::Categorical {
                        span: start..start + self.schema.column(i).categories().len(),
                    },
                }
            })
            .collect()
    }

    /// Maps each spec column to its index in `d`, verifying name, kind and
    /// categories agree. Feature groups are not compared; they do not
    /// affect the encoding.
    fn match_columns(&self, d: &Dataset) -> Result<Vec<usize>, TransformError> {
        self.schema
            .columns()
            .iter()
            .map(|col| {
                let idx = d
                    .schema()
                    .index_of(col.name())
                    .ok_or_else(|| TransformError::MissingColumn(col.name().to_string()))?;
                let found = d.schema().column(idx);
                if found.kind() != col.kind() || found.categories() != col.categories() {
                    return Err(TransformError::ColumnMismatch(col.name().to_string()));
                }
                Ok(idx)
            })
            .collect()
    }

    /// Encodes rows into the dense representation.
    ///
    /// The seed drives mode assignment: each numeric value's mode is drawn
    /// from the posterior responsibilities of the fitted mixture, so the
    /// encoded mode indicators reproduce the mixture statistics instead of
    /// collapsing onto the nearest mode.
    pub fn encode(&self, d: &Dataset, seed: u64) -> Result<EncodedMatrix, TransformError> {
        let col_idx = self.match_columns(d)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0f64; d.n_rows() * self.width];

        for (r, row) in d.rows().iter().enumerate() {
            let out = &mut values[r * self.width..(r + 1) * self.width];
            for (c, encoder) in self.encoders.iter().enumerate() {
                let start = self.starts[c];
                match (encoder, row[col_idx[c]]) {
                    (Encoder::Modes(modes), Cell::Num(x)) => {
                        let m = sample_mode(modes, x, &mut rng);
                        let alpha =
                            ((x - modes[m].mean) / (SCALE_FACTOR * modes[m].std)).clamp(-1.0, 1.0);
                        out[start] = alpha;
                        out[start + 1 + m] = 1.0;
                    }
                    (Encoder::OneHot, Cell::Cat(code)) => {
                        out[start + code as usize] = 1.0;
                    }
                    _ => return Err(TransformError::ColumnMismatch(
                        self.schema.column(c).name().to_string(),
                    )),
                }
            }
        }
        EncodedMatrix::new(d.n_rows(), self.width, values)
    }

    /// Inverts an encoded matrix back to rows.
    ///
    /// Spans may be soft: the mode and category are taken by argmax, and
    /// the numeric scalar is clipped to [-1, 1] before inversion, matching
    /// the clip applied on encode.
    pub fn decode(&self, m: &EncodedMatrix) -> Result<Dataset, TransformError> {
        if m.width() != self.width {
            return Err(TransformError::WidthMismatch {
                expected: self.width,
                found: m.width(),
            });
        }
        let mut rows = Vec::with_capacity(m.n_rows());
        for r in 0..m.n_rows() {
            let enc = m.row(r);
            let mut row = Vec::with_capacity(self.schema.len());
            for (c, encoder) in self.encoders.iter().enumerate() {
                let start = self.starts[c];
                match encoder {
                    Encoder::Modes(modes) => {
                        let span = &enc[start + 1..start + 1 + modes.len()];
                        let mode = argmax(span);
                        let alpha = enc[start].clamp(-1.0, 1.0);
                        let x = alpha * SCALE_FACTOR * modes[mode].std + modes[mode].mean;
                        row.push(Cell::Num(x));
                    }
                    Encoder::OneHot => {
                        let len = self.schema.column(c).categories().len();
                        let span = &enc[start..start + len];
                        row.push(Cell::Cat(argmax(span) as u32));
                    }
                }
            }
            rows.push(row);
        }
        Ok(Dataset::new(self.schema.clone(), rows)?)
    }

    /// Checks the hard-span invariants: every mode and category span holds
    /// exactly one 1 and zeros elsewhere, and every scalar is in [-1, 1].
    pub fn validate_hard(&self, m: &EncodedMatrix) -> Result<(), TransformError> {
        if m.width() != self.width {
            return Err(TransformError::WidthMismatch {
                expected: self.width,
                found: m.width(),
            });
        }
        let spans = self.column_spans();
        for r in 0..m.n_rows() {
            let enc = m.row(r);
            for span in &spans {
                let (one_hot, scalar) = match span {
                    ColumnSpan::Numeric { scalar, modes } => {
                        (&enc[modes.clone()], Some(enc[*scalar]))
                    }
                    ColumnSpan::Categorical { span } => (&enc[span.clone()], None),
                };
                if let Some(s) = scalar {
                    if !(-1.0..=1.0).contains(&s) {
                        return Err(TransformError::BadMatrix(format!(
                            "row {r}: scalar {s} outside [-1, 1]"
                        )));
                    }
                }
                let ones = one_hot.iter().filter(|&&v| v == 1.0).count();
                let zeros = one_hot.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != one_hot.len() {
                    return Err(TransformError::BadMatrix(format!(
                        "row {r}: span is not one-hot"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn argmax(span: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in span.iter().enumerate() {
        if v > span[best] {
            best = i;
        }
    }
    best
}

fn sample_mode(modes: &[Mode], x: f64, rng: &mut ChaCha8Rng) -> usize {
    if modes.len() == 1 {
        return 0;
    }
    let mut logp: Vec<f64> = modes
        .iter()
        .map(|m| {
            let z = (x - m.mean) / m.std;
            m.weight.max(1e-300).ln() - m.std.ln() - 0.5 * z * z
        })
        .collect();
    let max_lp = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_lp.is_finite() {
        // Every density underflowed; fall back to the closest mode in
        // standard deviations.
        let mut best = 0;
        let mut best_z = f64::INFINITY;
        for (i, m) in modes.iter().enumerate() {
            let z = ((x - m.mean) / m.std).abs();
            if z < best_z {
                best_z = z;
                best = i;
            }
        }
        return best;
    }
    let mut total = 0.0;
    for lp in &mut logp {
        *lp = (*lp - max_lp).exp();
        total += *lp;
    }
    let mut target = rng.random::<f64>() * total;
    for (i, p) in logp.iter().enumerate() {
        if target < *p {
            return i;
        }
        target -= p;
    }
    modes.len() - 1
}

mod text;
pub use text::{spec_from_text, spec_to_text};
