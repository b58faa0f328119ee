//! Variational autoencoder over the mode-normalized encoding.
//!
//! The encoder maps an encoded row to a latent Gaussian (mu, log sigma);
//! a reparameterized draw z = mu + sigma * eps feeds the decoder, whose
//! span head emits tanh scalars and softmaxed one-hot spans. Training
//! maximizes the ELBO: a reconstruction term (weighted squared error on
//! scalars under a learned per-scalar noise, cross-entropy on spans)
//! minus the KL divergence from the standard normal prior. Sampling
//! draws z from the prior, decodes, and adds the learned noise to the
//! scalar outputs so their residual dispersion is preserved.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    demote_label, finish_sample, recon_loss_and_grad, span_layout, standard_normal_mat,
    Method, SynthConfig, SynthError,
};
use crate::models::encoded_to_mat;
use crate::neural::{adam_step, Activation, AdamState, DenseNet, LayerSpec, Mat, SpanActivation};
use crate::seed;
use crate::tabular::Dataset;
use crate::transform::{fit_transform_spec, EncodedMatrix, TransformSpec};

pub(crate) const RECON_WEIGHT: f64 = 2.0;
const SOFTMAX_TEMPERATURE: f64 = 1.0;
const SIGMA_INIT: f64 = 0.1;
const SIGMA_MIN: f64 = 0.01;
const SIGMA_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TvaeModel {
    spec: TransformSpec,
    encoder: DenseNet,
    decoder: DenseNet,
    sigmas: Vec<f64>,
    latent_dim: usize,
    recon_weight: f64,
    label: Option<String>,
    elbo_history: Vec<f64>,
}

pub fn fit_tvae(d: &Dataset, cfg: &SynthConfig) -> Result<TvaeModel, SynthError> {
    cfg.expect_method(Method::Tvae)?;
    cfg.validate()?;
    if d.n_rows() == 0 {
        return Err(SynthError::EmptyDataset);
    }

    let (train, label) = demote_label(d)?;
    let spec = fit_transform_spec(&train, cfg.max_modes, seed::mix(cfg.seed, "spec"))?;
    let encoded = spec.encode(&train, seed::mix(cfg.seed, "encode"))?;
    let data = encoded_to_mat(&encoded);
    let width = spec.width();
    let latent = cfg.latent_dim;

    let (h1, h2) = cfg.architecture.hidden();
    let mut encoder = DenseNet::new(
        width,
        &[
            LayerSpec::new(h1, Activation::Relu),
            LayerSpec::new(h2, Activation::Relu),
            LayerSpec::new(2 * latent, Activation::Identity),
        ],
        seed::mix(cfg.seed, "encoder-init"),
    )?;
    let (tanh_positions, spans) = span_layout(&spec);
    let head = SpanActivation::new(tanh_positions.clone(), spans.clone(), SOFTMAX_TEMPERATURE)?;
    let mut decoder = DenseNet::new(
        latent,
        &[
            LayerSpec::new(h1, Activation::Relu),
            LayerSpec::new(h2, Activation::Relu),
            LayerSpec::new(width, Activation::Spans(head)),
        ],
        seed::mix(cfg.seed, "decoder-init"),
    )?;

    let mut opt_enc = AdamState::standard(&encoder);
    let mut opt_dec = AdamState::standard(&decoder);
    let mut sigmas = vec![SIGMA_INIT; tanh_positions.len()];
    let mut sigma_opt = ScalarAdam::new(sigmas.len());
    let mut noise = ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, "noise"));
    let mut elbo_history = Vec::with_capacity(cfg.epochs);
    let started = Instant::now();

    let n = data.rows();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let mut shuffle =
            ChaCha8Rng::seed_from_u64(seed::mix(cfg.seed, &format!("shuffle-{epoch}")));
        order.shuffle(&mut shuffle);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            let bf = b as f64;
            let x = gather_rows(&data, chunk);

            let trace_enc = encoder.forward_trace(&x)?;
            let enc_out = trace_enc.output();

            let mut z = Mat::zeros(b, latent);
            let mut eps = Mat::zeros(b, latent);
            let mut sigma = Mat::zeros(b, latent);
            let mut kl = 0.0;
            for i in 0..b {
                for j in 0..latent {
                    let mu = enc_out.get(i, j);
                    let s = enc_out.get(i, latent + j);
                    let sg = s.exp();
                    let e: f64 = StandardNormal.sample(&mut noise);
                    z.set(i, j, mu + sg * e);
                    eps.set(i, j, e);
                    sigma.set(i, j, sg);
                    kl += 0.5 * (mu * mu + sg * sg - 1.0 - 2.0 * s);
                }
            }
            kl /= bf;

            let trace_dec = decoder.forward_trace(&z)?;
            let (recon, d_y, d_sigma) = recon_loss_and_grad(
                trace_dec.output(),
                &x,
                &tanh_positions,
                &sigmas,
                &spans,
                RECON_WEIGHT,
            );
            let (grads_dec, d_z) = decoder.backward(&trace_dec, &d_y)?;

            let mut d_enc = Mat::zeros(b, 2 * latent);
            for i in 0..b {
                for j in 0..latent {
                    let mu = enc_out.get(i, j);
                    let sg = sigma.get(i, j);
                    let dz = d_z.get(i, j);
                    d_enc.set(i, j, dz + mu / bf);
                    d_enc.set(i, latent + j, dz * eps.get(i, j) * sg + (sg * sg - 1.0) / bf);
                }
            }
            let (grads_enc, _) = encoder.backward(&trace_enc, &d_enc)?;

            adam_step(&mut decoder, &grads_dec, &mut opt_dec)?;
            adam_step(&mut encoder, &grads_enc, &mut opt_enc)?;
            sigma_opt.step(&mut sigmas, &d_sigma);
            epoch_loss += recon + kl;
            batches += 1;
        }
        elbo_history.push(-(epoch_loss / batches as f64));

        if let Some(limit) = cfg.max_train_seconds {
            if started.elapsed().as_secs() >= limit {
                break;
            }
        }
    }

    Ok(TvaeModel {
        spec,
        encoder,
        decoder,
        sigmas,
        latent_dim: latent,
        recon_weight: RECON_WEIGHT,
        label,
        elbo_history,
    })
}

fn gather_rows(data: &Mat, idx: &[usize]) -> Mat {
    let mut out = Vec::with_capacity(idx.len() * data.cols());
    for &i in idx {
        out.extend_from_slice(data.row(i));
    }
    Mat::from_vec(idx.len(), data.cols(), out).expect("sized above")
}

/// Adam over the noise sigmas, which live outside the networks. Steps
/// use the same hyperparameters as [`AdamState::standard`] and clamp
/// each sigma into its stable range afterwards.
struct ScalarAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ScalarAdam {
    fn new(len: usize) -> ScalarAdam {
        ScalarAdam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const LR: f64 = 1e-3;
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        for (k, p) in params.iter_mut().enumerate() {
            let g = grads[k];
            self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * g;
            self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * g * g;
            let mh = self.m[k] / (1.0 - BETA1.powi(self.t));
            let vh = self.v[k] / (1.0 - BETA2.powi(self.t));
            *p = (*p - LR * mh / (vh.sqrt() + EPS)).clamp(SIGMA_MIN, SIGMA_MAX);
        }
    }
}

impl TvaeModel {
    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &DenseNet {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNet {
        &self.decoder
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn recon_weight(&self) -> f64 {
        self.recon_weight
    }

    /// Learned noise added to each tanh scalar output when sampling, in
    /// span-layout order.
    pub fn output_noise(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Per-epoch ELBO on the training data (negative of the mean batch
    /// loss). Not persisted by the text format.
    pub fn elbo_history(&self) -> &[f64] {
        &self.elbo_history
    }

    pub(crate) fn from_parts(
        spec: TransformSpec,
        encoder: DenseNet,
        decoder: DenseNet,
        sigmas: Vec<f64>,
        latent_dim: usize,
        recon_weight: f64,
        label: Option<String>,
    ) -> Result<TvaeModel, SynthError> {
        let (tanh_positions, _) = span_layout(&spec);
        if sigmas.len() != tanh_positions.len() {
            return Err(SynthError::BadConfig(format!(
                "{} noise sigmas for {} scalar outputs",
                sigmas.len(),
                tanh_positions.len()
            )));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(SynthError::BadConfig(
                "noise sigmas must be positive and finite".into(),
            ));
        }
        if encoder.input_dim() != spec.width() {
            return Err(SynthError::BadConfig(format!(
                "encoder input {} does not match encoded width {}",
                encoder.input_dim(),
                spec.width()
            )));
        }
        if encoder.output_dim() != 2 * latent_dim {
            return Err(SynthError::BadConfig(format!(
                "encoder output {} is not twice the latent dimension {latent_dim}",
                encoder.output_dim()
            )));
        }
        if decoder.input_dim() != latent_dim || decoder.output_dim() != spec.width() {
            return Err(SynthError::BadConfig(format!(
                "decoder maps {} -> {}, expected {latent_dim} -> {}",
                decoder.input_dim(),
                decoder.output_dim(),
                spec.width()
            )));
        }
        if !(recon_weight.is_finite() && recon_weight > 0.0) {
            return Err(SynthError::BadConfig(format!(
                "reconstruction weight {recon_weight} must be positive"
            )));
        }
        Ok(TvaeModel {
            spec,
            encoder,
            decoder,
            sigmas,
            latent_dim,
            recon_weight,
            label,
            elbo_history: Vec::new(),
        })
    }

    pub fn sample(&self, n: usize, sample_seed: u64) -> Result<Dataset, SynthError> {
        if n == 0 {
            return Err(SynthError::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let z = standard_normal_mat(n, self.latent_dim, &mut rng);
        let mut y = self.decoder.forward(&z)?;
        let (tanh_positions, _) = span_layout(&self.spec);
        for i in 0..n {
            let row = y.row_mut(i);
            for (k, &p) in tanh_positions.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                row[p] += self.sigmas[k] * e;
            }
        }
        let encoded = EncodedMatrix::new(n, self.spec.width(), y.data().to_vec())?;
        let decoded = self.spec.decode(&encoded)?;
        finish_sample(decoded, self.label.as_deref())
    }

    /// Mean of the encoder's mu head over a dataset's encoded rows. After
    /// training, the KL term keeps this vector's norm small.
    pub fn mean_latent(&self, d: &Dataset, encode_seed: u64) -> Result<Vec<f64>, SynthError> {
        let (view, _) = demote_label(d)?;
        let encoded = self.spec.encode(&view, encode_seed)?;
        let out = self.encoder.forward(&encoded_to_mat(&encoded))?;
        let mut mean = vec![0.0; self.latent_dim];
        for i in 0..out.rows() {
            for (j, m) in mean.iter_mut().enumerate() {
                *m += out.get(i, j);
            }
        }
        for m in &mut mean {
            *m /= out.rows() as f64;
        }
        Ok(mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{cstest_quality, kstest_quality};
    use crate::synth::testdata::bimodal_with_flag;
    use crate::synth::Architecture;
    use crate::tabular::{Cell, ColumnSchema, FeatureGroup, Provenance, Schema};

    fn small_cfg(seed: u64) -> SynthConfig {
        let mut cfg = SynthConfig::tvae().with_seed(seed);
        cfg.architecture = Architecture::B;
        cfg.latent_dim = 8;
        cfg.epochs = 30;
        cfg.batch_size = 100;
        cfg
    }

    #[test]
    fn learns_a_two_mode_numeric_and_balanced_flag() {
        let train = bimodal_with_flag(6_000, 41);
        let fresh = bimodal_with_flag(6_000, 42);
        let mut cfg = SynthConfig::tvae().with_seed(7);
        cfg.architecture = Architecture::B;
        cfg.latent_dim = 16;
        cfg.epochs = 300;
        cfg.batch_size = 250;

        let model = fit_tvae(&train, &cfg).unwrap();
        let synth = model.sample(6_000, 11).unwrap();

        let ks = kstest_quality(
            &fresh.numeric_column("amount").unwrap(),
            &synth.numeric_column("amount").unwrap(),
        )
        .unwrap();
        let cs = cstest_quality(
            &fresh.categorical_column("flag").unwrap(),
            &synth.categorical_column("flag").unwrap(),
            2,
        )
        .unwrap();
        assert!(ks >= 0.90, "KS quality {ks}");
        assert!(cs >= 0.90, "CS quality {cs}");
    }

    #[test]
    fn elbo_is_finite_and_improves_on_trend() {
        let train = bimodal_with_flag(1_000, 5);
        let model = fit_tvae(&train, &small_cfg(3)).unwrap();
        let hist = model.elbo_history();
        assert_eq!(hist.len(), 30);
        assert!(hist.iter().all(|v| v.is_finite()));
        let mut deltas: Vec<f64> = hist.windows(2).map(|w| w[1] - w[0]).collect();
        deltas.sort_by(f64::total_cmp);
        let median = deltas[deltas.len() / 2];
        assert!(median >= 0.0, "median epoch delta {median}");
    }

    #[test]
    fn constant_categorical_is_reproduced_exactly() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("x", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical(
                "c",
                FeatureGroup::Other,
                vec!["a".into(), "b".into(), "z".into()],
            )
            .unwrap(),
        ])
        .unwrap();
        let rows = (0..400)
            .map(|i| vec![Cell::Num((i % 7) as f64), Cell::Cat(1)])
            .collect();
        let d = Dataset::new(schema, rows).unwrap();
        let model = fit_tvae(&d, &small_cfg(13)).unwrap();
        let s = model.sample(300, 17).unwrap();
        assert!(s.categorical_column("c").unwrap().iter().all(|&c| c == 1));
    }

    #[test]
    fn fit_and_sample_are_deterministic() {
        let d = bimodal_with_flag(300, 19);
        let mut cfg = small_cfg(23);
        cfg.epochs = 5;
        cfg.latent_dim = 4;
        let a = fit_tvae(&d, &cfg).unwrap();
        let b = fit_tvae(&d, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample(64, 29).unwrap(), b.sample(64, 29).unwrap());
    }

    #[test]
    fn trained_latent_mean_stays_near_the_prior() {
        let d = bimodal_with_flag(1_000, 31);
        let model = fit_tvae(&d, &small_cfg(37)).unwrap();
        let mean = model.mean_latent(&d, 43).unwrap();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= 1.0, "latent mean norm {norm}");
    }

    #[test]
    fn label_column_round_trips_through_sampling() {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("x", FeatureGroup::Fin).unwrap(),
            ColumnSchema::label("y").unwrap(),
        ])
        .unwrap();
        let rows = (0..500)
            .map(|i| vec![Cell::Num((i % 11) as f64 * 0.5), Cell::Cat((i % 2) as u32)])
            .collect();
        let d = Dataset::new(schema.clone(), rows).unwrap();
        let mut cfg = small_cfg(47);
        cfg.epochs = 10;
        let model = fit_tvae(&d, &cfg).unwrap();
        assert_eq!(model.label(), Some("y"));
        let s = model.sample(100, 53).unwrap();
        assert_eq!(s.schema(), &schema);
        assert_eq!(s.provenance(), Provenance::Synthetic);
        assert!(s.labels().is_ok());
    }

    #[test]
    fn wall_clock_budget_stops_after_one_epoch() {
        let d = bimodal_with_flag(500, 59);
        let mut cfg = small_cfg(61);
        cfg.epochs = 50;
        cfg.max_train_seconds = Some(0);
        let model = fit_tvae(&d, &cfg).unwrap();
        assert_eq!(model.elbo_history().len(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = bimodal_with_flag(50, 67);
        assert!(matches!(
            fit_tvae(&d, &SynthConfig::ctgan()),
            Err(SynthError::MethodMismatch { .. })
        ));
        let mut cfg = small_cfg(1);
        cfg.latent_dim = 0;
        assert!(matches!(fit_tvae(&d, &cfg), Err(SynthError::BadConfig(_))));
        let empty = Dataset::new(d.schema().clone(), vec![]).unwrap();
        assert!(matches!(
            fit_tvae(&empty, &small_cfg(2)),
            Err(SynthError::EmptyDataset)
        ));
    }
}
