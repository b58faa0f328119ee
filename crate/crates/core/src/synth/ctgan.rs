//! Conditional GAN over the mode-normalized encoding.
//!
//! Each training batch picks a categorical column uniformly, a category by
//! log-frequency, and a real row from that category, so rare categories are
//! seen far more often than their raw share. The generator receives the
//! condition vector alongside the latent draw and pays a cross-entropy
//! penalty whenever its output span disagrees with the requested category;
//! the discriminator scores (row, condition) pairs with the non-saturating
//! GAN losses. Span outputs pass through a gumbel-noise softmax at low
//! temperature during both training and sampling, keeping them close to
//! one-hot while staying differentiable.

use std::ops::Range;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    demote_label, finish_sample, span_layout, standard_normal_mat, Method, SynthConfig,
    SynthError,
};
use crate::models::encoded_to_mat;
use crate::neural::{
    adam_step, loss_with_gradient, Activation, AdamState, DenseNet, LayerSpec, Loss, Mat,
    SpanActivation,
};
use crate::seed;
use crate::tabular::{ColumnKind, Dataset};
use crate::transform::{fit_transform_spec, ColumnSpan, EncodedMatrix, TransformSpec};

const GUMBEL_TEMPERATURE: f64 = 0.2;
const PROB_FLOOR: f64 = 1e-12;

/// One categorical column available for conditioning.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Condition {
    pub name: String,
    /// The column's one-hot span in the encoded row.
    pub span: Range<usize>,
    /// Training-time category distribution (log-frequency).
    pub log_probs: Vec<f64>,
    /// Generation-time category distribution (empirical frequency).
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtganModel {
    spec: TransformSpec,
    generator: DenseNet,
    discriminator: DenseNet,
    latent_dim: usize,
    label: Option<String>,
    conditions: Vec<Condition>,
    d_loss_history: Vec<f64>,
    g_loss_history: Vec<f64>,
}

/// Normalized log-frequency distribution over category counts: category i
/// gets weight ln(1 + counts[i]). Zero-count categories get probability 0.
pub fn log_frequency_probs(counts: &[usize]) -> Vec<f64> {
    let weights: Vec<f64> = counts.iter().map(|&c| (1.0 + c as f64).ln()).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0.0; counts.len()];
    }
    weights.into_iter().map(|w| w / total).collect()
}

/// Draws a category index, walking only the positive-probability entries
/// so float rounding can never select an empty category.
fn sample_category(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut target = rng.random::<f64>();
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        if target < p {
            return i;
        }
        target -= p;
        last = Some(i);
    }
    last.expect("a condition distribution has a positive entry")
}

fn gumbel(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-300);
    -(-u.ln()).ln()
}

/// Samples one condition per row: column uniform, category from the given
/// per-column distributions. Returns the one-hot condition matrix plus the
/// (column, category) picks.
fn sample_condition_batch(
    conditions: &[Condition],
    use_log: bool,
    b: usize,
    cond_width: usize,
    rng: &mut ChaCha8Rng,
) -> (Mat, Vec<(usize, usize)>) {
    let mut cond = Mat::zeros(b, cond_width);
    let mut picks = Vec::with_capacity(b);
    let mut offsets = Vec::with_capacity(conditions.len());
    let mut off = 0;
    for c in conditions {
        offsets.push(off);
        off += c.span.len();
    }
    for i in 0..b {
        let ci = rng.random_range(0..conditions.len());
        let probs = if use_log {
            &conditions[ci].log_probs
        } else {
            &conditions[ci].frequencies
        };
        let cat = sample_category(probs, rng);
        cond.set(i, offsets[ci] + cat, 1.0);
        picks.push((ci, cat));
    }
    (cond, picks)
}

fn add_gumbel_noise(logits: &Mat, spans: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Mat {
    let mut noisy = logits.clone();
    for i in 0..noisy.rows() {
        let row = noisy.row_mut(i);
        for &(start, len) in spans {
            for p in start..start + len {
                row[p] += gumbel(rng);
            }
        }
    }
    noisy
}

fn conditions_from_spec(
    spec: &TransformSpec,
    train: &Dataset,
) -> Result<Vec<Condition>, SynthError> {
    let spans = spec.column_spans();
    let n = train.n_rows() as f64;
    let mut conditions = Vec::new();
    for (c, col) in spec.schema().columns().iter().enumerate() {
        if col.kind() != ColumnKind::Categorical {
            continue;
        }
        let ColumnSpan::Categorical { span } = &spans[c] else {
            unreachable!("categorical column has a categorical span");
        };
        let codes = train.categorical_column(col.name())?;
        let mut counts = vec![0usize; col.categories().len()];
        for code in codes {
            counts[code as usize] += 1;
        }
        conditions.push(Condition {
            name: col.name().to_string(),
            span: span.clone(),
            log_probs: log_frequency_probs(&counts),
            frequencies: counts.iter().map(|&c| c as f64 / n).collect(),
        });
    }
    Ok(conditions)
}

pub fn fit_ctgan(d: &Dataset, cfg: &SynthConfig) -> Result<CtganModel, SynthError> {
    cfg.expect_method(Method::Ctgan)?;
    cfg.validate()?;
    if d.n_rows() == 0 {
        return Err(SynthError::EmptyDataset);
    }

    let (train, label) = demote_label(d)?;
    let spec = fit_transform_spec(&train, cfg.max_modes, seed::mix(cfg.seed, "spec"))?;
    let conditions = conditions_from_spec(&spec, &train)?;
    if conditions.is_empty() {
        return Err(SynthError::NoCategoricalColumns);
    }
    let cond_width: usize = conditions.iter().map(|c| c.span.len()).sum();

    let encoded = spec.encode(&train, seed::mix(cfg.seed, "encode"))?;
    let data = encoded_to_mat(&encoded);
    let width = spec.width();
    let latent = cfg.latent_dim;

    // Row indices per (condition column, category), for category-matched
    // real batches.
    let rows_by_cat: Vec<Vec<Vec<usize>>> = conditions
        .iter()
        .map(|c| {
            let codes = train.categorical_column(&c.name).expect("fitted column");
            let mut lists = vec![Vec::new(); c.log_probs.len()];
            for (row, code) in codes.into_iter().enumerate() {
                lists[code as usize].push(row);
            }
            lists
        })
        .collect();

    let (h1, h2) = cfg.architecture.hidden();
    let mut generator = DenseNet::new(
        latent + cond_width,
        &[
            LayerSpec::residual(h1, Activation::Relu),
            LayerSpec::residual(h2, Activation::Relu),
            LayerSpec::new(width, Activation::Identity),
        ],
        seed::mix(cfg.seed, "generator-init"),
    )?;
    let mut discriminator = DenseNet::new(
        width + cond_width,
        &[
            LayerSpec::new(h1, Activation::Relu),
            LayerSpec::new(h2, Activation::Relu),
            LayerSpec::new(1, Activation::Sigmoid),
        ],
        seed::mix(cfg.seed, "discriminator-init"),
    )?;
    let (tanh_positions, spans) = span_layout(&spec);
    let head = SpanActivation::new(tanh_positions, spans.clone(), GUMBEL_TEMPERATURE)?;

    let mut opt_g = AdamState::adversarial(&generator);
    let mut opt_d = AdamState::adversarial(&discriminator);
    let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, "train"));

    let b = cfg.batch_size;
    let steps_per_epoch = (data.rows() / b).max(1);
    let ones = vec![1.0; b];
    let zeros = vec![0.0; b];
    let mut d_loss_history = Vec::with_capacity(cfg.epochs);
    let mut g_loss_history = Vec::with_capacity(cfg.epochs);
    let started = Instant::now();

    for _ in 0..cfg.epochs {
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        for _ in 0..steps_per_epoch {
            // Discriminator step: real rows matched to the sampled
            // conditions against generator output under the same
            // conditions.
            let (cond, picks) = sample_condition_batch(&conditions, true, b, cond_width, &mut rng);
            let mut real = Mat::zeros(b, width);
            for (i, &(ci, cat)) in picks.iter().enumerate() {
                let list = &rows_by_cat[ci][cat];
                let row = list[rng.random_range(0..list.len())];
                real.row_mut(i).copy_from_slice(data.row(row));
            }
            let z = standard_normal_mat(b, latent, &mut rng);
            let g_logits = generator.forward(&Mat::concat_cols(&z, &cond))?;
            let fake = head.apply(&add_gumbel_noise(&g_logits, &spans, &mut rng));

            let trace_real = discriminator.forward_trace(&Mat::concat_cols(&real, &cond))?;
            let (loss_real, d_real) = loss_with_gradient(
                trace_real.output(),
                &Loss::BinaryCrossEntropy { targets: ones.clone() },
            )?;
            let (mut d_grads, _) = discriminator.backward(&trace_real, &d_real)?;
            let trace_fake = discriminator.forward_trace(&Mat::concat_cols(&fake, &cond))?;
            let (loss_fake, d_fake) = loss_with_gradient(
                trace_fake.output(),
                &Loss::BinaryCrossEntropy { targets: zeros.clone() },
            )?;
            let (fake_grads, _) = discriminator.backward(&trace_fake, &d_fake)?;
            d_grads.add_assign(&fake_grads);
            adam_step(&mut discriminator, &d_grads, &mut opt_d)?;
            d_sum += loss_real + loss_fake;

            // Generator step: fool the updated discriminator and match the
            // requested condition category.
            let (cond, picks) = sample_condition_batch(&conditions, true, b, cond_width, &mut rng);
            let z = standard_normal_mat(b, latent, &mut rng);
            let trace_gen = generator.forward_trace(&Mat::concat_cols(&z, &cond))?;
            let logits = trace_gen.output();
            let noisy = add_gumbel_noise(logits, &spans, &mut rng);
            let y = head.apply(&noisy);

            let trace_disc = discriminator.forward_trace(&Mat::concat_cols(&y, &cond))?;
            let (adv_loss, d_adv) = loss_with_gradient(
                trace_disc.output(),
                &Loss::BinaryCrossEntropy { targets: ones.clone() },
            )?;
            let (_, d_disc_in) = discriminator.backward(&trace_disc, &d_adv)?;
            let mut d_logits = head.backward(&y, &d_disc_in.slice_cols(0, width));

            // Condition enforcement: cross-entropy between the raw span
            // logits and the requested category, at unit temperature.
            let bf = b as f64;
            let mut ce = 0.0;
            for (i, &(ci, cat)) in picks.iter().enumerate() {
                let span = conditions[ci].span.clone();
                let row = logits.row(i);
                let max = row[span.clone()]
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for p in span.clone() {
                    total += (row[p] - max).exp();
                }
                for (k, p) in span.clone().enumerate() {
                    let prob = (row[p] - max).exp() / total;
                    let target = f64::from(k == cat);
                    if k == cat {
                        ce += -prob.max(PROB_FLOOR).ln();
                    }
                    d_logits.row_mut(i)[p] += (prob - target) / bf;
                }
            }
            ce /= bf;

            let (g_grads, _) = generator.backward(&trace_gen, &d_logits)?;
            adam_step(&mut generator, &g_grads, &mut opt_g)?;
            g_sum += adv_loss + ce;
        }
        d_loss_history.push(d_sum / steps_per_epoch as f64);
        g_loss_history.push(g_sum / steps_per_epoch as f64);

        if let Some(limit) = cfg.max_train_seconds {
            if started.elapsed().as_secs() >= limit {
                break;
            }
        }
    }

    Ok(CtganModel {
        spec,
        generator,
        discriminator,
        latent_dim: latent,
        label,
        conditions,
        d_loss_history,
        g_loss_history,
    })
}

impl CtganModel {
    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn generator(&self) -> &DenseNet {
        &self.generator
    }

    pub fn discriminator(&self) -> &DenseNet {
        &self.discriminator
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Training-time condition distribution of one categorical column.
    pub fn log_frequency_table(&self, column: &str) -> Option<&[f64]> {
        self.conditions
            .iter()
            .find(|c| c.name == column)
            .map(|c| c.log_probs.as_slice())
    }

    /// Per-epoch mean discriminator loss. Not persisted by the text format.
    pub fn d_loss_history(&self) -> &[f64] {
        &self.d_loss_history
    }

    /// Per-epoch mean generator loss. Not persisted by the text format.
    pub fn g_loss_history(&self) -> &[f64] {
        &self.g_loss_history
    }

    pub(crate) fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub(crate) fn from_parts(
        spec: TransformSpec,
        generator: DenseNet,
        discriminator: DenseNet,
        latent_dim: usize,
        label: Option<String>,
        tables: Vec<(String, Vec<f64>, Vec<f64>)>,
    ) -> Result<CtganModel, SynthError> {
        let spans = spec.column_spans();
        let mut conditions = Vec::with_capacity(tables.len());
        for (name, log_probs, frequencies) in tables {
            let idx = spec
                .schema()
                .index_of(&name)
                .ok_or_else(|| SynthError::BadConfig(format!("unknown condition column {name:?}")))?;
            let col = spec.schema().column(idx);
            let ColumnSpan::Categorical { span } = &spans[idx] else {
                return Err(SynthError::BadConfig(format!(
                    "condition column {name:?} is not categorical"
                )));
            };
            for probs in [&log_probs, &frequencies] {
                if probs.len() != col.categories().len() {
                    return Err(SynthError::BadConfig(format!(
                        "column {name:?}: {} probabilities for {} categories",
                        probs.len(),
                        col.categories().len()
                    )));
                }
                let total: f64 = probs.iter().sum();
                if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (total - 1.0).abs() > 1e-9 {
                    return Err(SynthError::BadConfig(format!(
                        "column {name:?}: probabilities do not form a distribution"
                    )));
                }
            }
            conditions.push(Condition {
                name,
                span: span.clone(),
                log_probs,
                frequencies,
            });
        }
        if conditions.is_empty() {
            return Err(SynthError::NoCategoricalColumns);
        }
        let cond_width: usize = conditions.iter().map(|c| c.span.len()).sum();
        if generator.input_dim() != latent_dim + cond_width
            || generator.output_dim() != spec.width()
        {
            return Err(SynthError::BadConfig(format!(
                "generator maps {} -> {}, expected {} -> {}",
                generator.input_dim(),
                generator.output_dim(),
                latent_dim + cond_width,
                spec.width()
            )));
        }
        if discriminator.input_dim() != spec.width() + cond_width
            || discriminator.output_dim() != 1
        {
            return Err(SynthError::BadConfig(format!(
                "discriminator maps {} -> {}, expected {} -> 1",
                discriminator.input_dim(),
                discriminator.output_dim(),
                spec.width() + cond_width
            )));
        }
        Ok(CtganModel {
            spec,
            generator,
            discriminator,
            latent_dim,
            label,
            conditions,
            d_loss_history: Vec::new(),
            g_loss_history: Vec::new(),
        })
    }

    pub fn sample(&self, n: usize, sample_seed: u64) -> Result<Dataset, SynthError> {
        if n == 0 {
            return Err(SynthError::EmptySample);
        }
        let cond_width: usize = self.conditions.iter().map(|c| c.span.len()).sum();
        let (tanh_positions, spans) = span_layout(&self.spec);
        let head = SpanActivation::new(tanh_positions, spans.clone(), GUMBEL_TEMPERATURE)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        // Generation conditions follow the empirical category frequencies,
        // so marginals are not skewed toward rare categories the way the
        // log-frequency training distribution is.
        let (cond, _) =
            sample_condition_batch(&self.conditions, false, n, cond_width, &mut rng);
        let z = standard_normal_mat(n, self.latent_dim, &mut rng);
        let logits = self.generator.forward(&Mat::concat_cols(&z, &cond))?;
        let y = head.apply(&add_gumbel_noise(&logits, &spans, &mut rng));
        let encoded = EncodedMatrix::new(n, self.spec.width(), y.data().to_vec())?;
        let decoded = self.spec.decode(&encoded)?;
        finish_sample(decoded, self.label.as_deref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::kstest_quality;
    use crate::synth::testdata::bimodal_with_flag;
    use crate::synth::Architecture;
    use crate::tabular::{Cell, ColumnSchema, FeatureGroup, Provenance, Schema};

    fn tiny_cfg(seed: u64) -> SynthConfig {
        let mut cfg = SynthConfig::ctgan().with_seed(seed);
        cfg.architecture = Architecture::B;
        cfg.latent_dim = 4;
        cfg.epochs = 3;
        cfg.batch_size = 64;
        cfg
    }

    #[test]
    fn log_frequency_normalization_matches_hand_computation() {
        let balanced = log_frequency_probs(&[5_000, 5_000]);
        assert!((balanced[0] - 0.5).abs() < 1e-12);
        assert!((balanced[1] - 0.5).abs() < 1e-12);

        let skewed = log_frequency_probs(&[9_900, 100]);
        let expected = (101f64).ln() / ((9_901f64).ln() + (101f64).ln());
        assert!((skewed[1] - expected).abs() < 1e-12);
        assert!((skewed[1] - 0.334).abs() < 0.002, "rare prob {}", skewed[1]);

        let with_empty = log_frequency_probs(&[10, 0]);
        assert_eq!(with_empty[1], 0.0);
        assert!((with_empty[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_conditions_follow_the_log_frequency_distribution() {
        // Balanced case exercised through a real fit.
        let d = bimodal_with_flag(1_000, 71);
        let model = fit_ctgan(&d, &tiny_cfg(73)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let (_, picks) =
            sample_condition_batch(model.conditions(), true, 10_000, 2, &mut rng);
        let ones = picks.iter().filter(|&&(_, cat)| cat == 1).count();
        assert!(
            (ones as f64 / 10_000.0 - 0.5).abs() < 0.02,
            "balanced condition rate {}",
            ones as f64 / 10_000.0
        );

        // Skewed case checked against the hand-computed probability.
        let skewed = Condition {
            name: "flag".into(),
            span: 0..2,
            log_probs: log_frequency_probs(&[9_900, 100]),
            frequencies: vec![0.99, 0.01],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        let (_, picks) = sample_condition_batch(&[skewed], true, 10_000, 2, &mut rng);
        let rare = picks.iter().filter(|&&(_, cat)| cat == 1).count();
        assert!(
            (rare as f64 / 10_000.0 - 0.334).abs() < 0.02,
            "rare condition rate {}",
            rare as f64 / 10_000.0
        );
    }

    #[test]
    fn all_numeric_data_is_rejected_with_guidance() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("a", FeatureGroup::Fin).unwrap(),
            ColumnSchema::numeric("b", FeatureGroup::Fin).unwrap(),
        ])
        .unwrap();
        let rows = (0..100)
            .map(|i| vec![Cell::Num(i as f64), Cell::Num(-(i as f64))])
            .collect();
        let d = Dataset::new(schema, rows).unwrap();
        let err = fit_ctgan(&d, &tiny_cfg(1)).unwrap_err();
        assert!(matches!(err, SynthError::NoCategoricalColumns));
        let msg = err.to_string();
        assert!(msg.contains("tvae") && msg.contains("independent"));
    }

    #[test]
    fn fit_and_sample_are_deterministic() {
        let d = bimodal_with_flag(200, 89);
        let a = fit_ctgan(&d, &tiny_cfg(97)).unwrap();
        let b = fit_ctgan(&d, &tiny_cfg(97)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample(64, 101).unwrap(), b.sample(64, 101).unwrap());
    }

    #[test]
    fn samples_close_over_the_training_schema() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("x", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical(
                "grade",
                FeatureGroup::Fin,
                vec!["A".into(), "B".into(), "C".into()],
            )
            .unwrap(),
            ColumnSchema::label("y").unwrap(),
        ])
        .unwrap();
        let rows = (0..300)
            .map(|i| {
                vec![
                    Cell::Num((i % 13) as f64),
                    Cell::Cat((i % 3) as u32),
                    Cell::Cat((i % 2) as u32),
                ]
            })
            .collect();
        let d = Dataset::new(schema.clone(), rows).unwrap();
        let model = fit_ctgan(&d, &tiny_cfg(103)).unwrap();
        let s = model.sample(150, 107).unwrap();
        assert_eq!(s.schema(), &schema);
        assert_eq!(s.provenance(), Provenance::Synthetic);
        let grades = s.categorical_column("grade").unwrap();
        assert!(grades.iter().all(|&g| g < 3));
        assert!(model.sample(0, 1).is_err());
    }

    #[test]
    fn trained_marginals_track_the_data() {
        let train = bimodal_with_flag(3_000, 109);
        let fresh = bimodal_with_flag(3_000, 113);
        let mut cfg = SynthConfig::ctgan().with_seed(127);
        cfg.architecture = Architecture::B;
        cfg.latent_dim = 16;
        cfg.epochs = 60;
        cfg.batch_size = 300;
        let model = fit_ctgan(&train, &cfg).unwrap();
        let s = model.sample(3_000, 131).unwrap();

        let flag_rate = s
            .categorical_column("flag")
            .unwrap()
            .iter()
            .filter(|&&c| c == 1)
            .count() as f64
            / 3_000.0;
        assert!((flag_rate - 0.5).abs() < 0.1, "flag rate {flag_rate}");

        let ks = kstest_quality(
            &fresh.numeric_column("amount").unwrap(),
            &s.numeric_column("amount").unwrap(),
        )
        .unwrap();
        assert!(ks >= 0.6, "KS quality {ks}");
        assert_eq!(model.d_loss_history().len(), 60);
        assert!(model
            .g_loss_history()
            .iter()
            .chain(model.d_loss_history())
            .all(|v| v.is_finite()));
    }
}
