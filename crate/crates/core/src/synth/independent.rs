//! Per-column marginal sampler.
//!
//! Fits each column in isolation: a Gaussian mixture for numerics, an
//! empirical histogram for categoricals. Sampling draws every column
//! independently, so marginal distributions are preserved while all
//! inter-column dependence is destroyed by construction. That makes this
//! the reference point separating marginal fidelity from joint fidelity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{finish_sample, sample_index, SynthError};
use crate::seed;
use crate::tabular::{Cell, ColumnKind, Dataset, Schema};
use crate::transform::{fit_modes, Mode};

const DEFAULT_MAX_MODES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ColumnSampler {
    /// Mixture components; a draw picks a mode by weight, then a normal.
    Numeric(Vec<Mode>),
    /// Category probabilities summing to 1.
    Categorical(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependentModel {
    schema: Schema,
    samplers: Vec<ColumnSampler>,
}

/// Fits marginals with the default mode budget.
pub fn fit_independent(d: &Dataset, seed: u64) -> Result<IndependentModel, SynthError> {
    fit_independent_with_modes(d, DEFAULT_MAX_MODES, seed)
}

/// Fits marginals with an explicit per-column mode budget.
pub fn fit_independent_with_modes(
    d: &Dataset,
    max_modes: usize,
    seed: u64,
) -> Result<IndependentModel, SynthError> {
    if d.n_rows() == 0 {
        return Err(SynthError::EmptyDataset);
    }
    if max_modes < 1 {
        return Err(SynthError::BadConfig("max_modes must be at least 1".into()));
    }
    let n = d.n_rows() as f64;
    let mut samplers = Vec::with_capacity(d.schema().len());
    for col in d.schema().columns() {
        match col.kind() {
            ColumnKind::Numeric => {
                let values = d.numeric_column(col.name())?;
                let modes = fit_modes(
                    &values,
                    max_modes,
                    seed::mix(seed, &format!("col-{}", col.name())),
                );
                samplers.push(ColumnSampler::Numeric(modes));
            }
            ColumnKind::Categorical => {
                let codes = d.categorical_column(col.name())?;
                let mut counts = vec![0usize; col.categories().len()];
                for c in codes {
                    counts[c as usize] += 1;
                }
                let probs = counts.iter().map(|&c| c as f64 / n).collect();
                samplers.push(ColumnSampler::Categorical(probs));
            }
        }
    }
    Ok(IndependentModel { schema: d.schema().clone(), samplers })
}

impl IndependentModel {
    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub(crate) fn samplers(&self) -> &[ColumnSampler] {
        &self.samplers
    }

    pub(crate) fn from_parts(
        schema: Schema,
        samplers: Vec<ColumnSampler>,
    ) -> Result<IndependentModel, SynthError> {
        if samplers.len() != schema.len() {
            return Err(SynthError::BadConfig(format!(
                "{} samplers for {} columns",
                samplers.len(),
                schema.len()
            )));
        }
        for (col, s) in schema.columns().iter().zip(&samplers) {
            match (col.kind(), s) {
                (ColumnKind::Numeric, ColumnSampler::Numeric(modes)) => {
                    if modes.is_empty() {
                        return Err(SynthError::BadConfig(format!(
                            "column {:?} has no modes",
                            col.name()
                        )));
                    }
                }
                (ColumnKind::Categorical, ColumnSampler::Categorical(probs)) => {
                    if probs.len() != col.categories().len() {
                        return Err(SynthError::BadConfig(format!(
                            "column {:?}: {} probabilities for {} categories",
                            col.name(),
                            probs.len(),
                            col.categories().len()
                        )));
                    }
                    let total: f64 = probs.iter().sum();
                    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p))
                        || (total - 1.0).abs() > 1e-9
                    {
                        return Err(SynthError::BadConfig(format!(
                            "column {:?}: probabilities do not form a distribution",
                            col.name()
                        )));
                    }
                }
                _ => {
                    return Err(SynthError::BadConfig(format!(
                        "sampler kind does not match column {:?}",
                        col.name()
                    )));
                }
            }
        }
        Ok(IndependentModel { schema, samplers })
    }

    pub fn sample(&self, n: usize, sample_seed: u64) -> Result<Dataset, SynthError> {
        if n == 0 {
            return Err(SynthError::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = Vec::with_capacity(self.samplers.len());
            for s in &self.samplers {
                match s {
                    ColumnSampler::Numeric(modes) => {
                        let weights: Vec<f64> = modes.iter().map(|m| m.weight).collect();
                        let m = &modes[sample_index(&weights, &mut rng)];
                        let z: f64 = StandardNormal.sample(&mut rng);
                        row.push(Cell::Num(m.mean + m.std * z));
                    }
                    ColumnSampler::Categorical(probs) => {
                        row.push(Cell::Cat(sample_index(probs, &mut rng) as u32));
                    }
                }
            }
            rows.push(row);
        }
        let d = Dataset::new(self.schema.clone(), rows)?;
        finish_sample(d, None)
    }
}
