//! Generative models for tabular data.
//!
//! Three synthesizers share one interface: a variational autoencoder
//! ([`TvaeModel`]), a conditional GAN ([`CtganModel`]), and an
//! independent-marginals baseline ([`IndependentModel`]). The deep models
//! train on the mode-normalized encoding from the transform module and
//! decode samples back through it, so every sampled dataset conforms to
//! the training schema. A label column, when present, is synthesized
//! jointly as an ordinary categorical column and promoted back to the
//! label group on output.

mod ctgan;
mod independent;
mod io;
mod tvae;

pub use ctgan::{fit_ctgan, log_frequency_probs, CtganModel};
pub use independent::{fit_independent, fit_independent_with_modes, IndependentModel};
pub use tvae::{fit_tvae, TvaeModel};

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neural::{Mat, NeuralError};
use crate::tabular::{Dataset, Provenance, TabularError};
use crate::transform::{ColumnSpan, TransformError, TransformSpec};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("config method is {found} but the operation expects {expected}")]
    MethodMismatch { expected: Method, found: Method },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(
        "conditional generation needs at least one categorical column; \
         use the tvae or independent method for all-numeric data"
    )]
    NoCategoricalColumns,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Hidden-layer widths used by both halves of a deep synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Hidden layers (256, 256).
    A,
    /// Hidden layers (64, 64).
    B,
}

impl Architecture {
    pub fn hidden(self) -> (usize, usize) {
        match self {
            Architecture::A => (256, 256),
            Architecture::B => (64, 64),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::A => write!(f, "A"),
            Architecture::B => write!(f, "B"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Tvae,
    Ctgan,
    Independent,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Tvae => write!(f, "tvae"),
            Method::Ctgan => write!(f, "ctgan"),
            Method::Independent => write!(f, "independent"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Method, String> {
        match s {
            "tvae" => Ok(Method::Tvae),
            "ctgan" => Ok(Method::Ctgan),
            "independent" => Ok(Method::Independent),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Training configuration shared by all synthesizers.
///
/// The independent baseline ignores everything except `max_modes` and
/// `seed`. `max_train_seconds`, when set, stops training at the first
/// epoch boundary past the budget; at least one epoch always runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub method: Method,
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub max_modes: usize,
    pub seed: u64,
    pub max_train_seconds: Option<u64>,
}

impl SynthConfig {
    fn defaults(method: Method) -> SynthConfig {
        SynthConfig {
            method,
            architecture: Architecture::A,
            epochs: 300,
            batch_size: 500,
            latent_dim: 128,
            max_modes: 5,
            seed: 0,
            max_train_seconds: None,
        }
    }

    pub fn tvae() -> SynthConfig {
        SynthConfig::defaults(Method::Tvae)
    }

    pub fn ctgan() -> SynthConfig {
        SynthConfig::defaults(Method::Ctgan)
    }

    pub fn independent() -> SynthConfig {
        SynthConfig::defaults(Method::Independent)
    }

    pub fn with_seed(mut self, seed: u64) -> SynthConfig {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.epochs < 1 {
            return Err(SynthError::BadConfig("epochs must be at least 1".into()));
        }
        if self.batch_size < 2 {
            return Err(SynthError::BadConfig("batch size must be at least 2".into()));
        }
        if self.latent_dim < 1 {
            return Err(SynthError::BadConfig("latent_dim must be at least 1".into()));
        }
        if self.max_modes < 1 {
            return Err(SynthError::BadConfig("max_modes must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn expect_method(&self, expected: Method) -> Result<(), SynthError> {
        if self.method != expected {
            return Err(SynthError::MethodMismatch {
                expected,
                found: self.method,
            });
        }
        Ok(())
    }
}

/// Any fitted synthesizer.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthModel {
    Tvae(TvaeModel),
    Ctgan(CtganModel),
    Independent(IndependentModel),
}

impl SynthModel {
    pub fn method(&self) -> Method {
        match self {
            SynthModel::Tvae(_) => Method::Tvae,
            SynthModel::Ctgan(_) => Method::Ctgan,
            SynthModel::Independent(_) => Method::Independent,
        }
    }

    /// Draws `n` synthetic rows. The output dataset carries the training
    /// schema and synthetic provenance.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, SynthError> {
        match self {
            SynthModel::Tvae(m) => m.sample(n, seed),
            SynthModel::Ctgan(m) => m.sample(n, seed),
            SynthModel::Independent(m) => m.sample(n, seed),
        }
    }

    pub fn to_text(&self) -> String {
        io::model_to_text(self)
    }

    pub fn from_text(text: &str) -> Result<SynthModel, SynthError> {
        io::model_from_text(text)
    }
}

/// Fits the synthesizer named by `cfg.method`.
pub fn fit_model(d: &Dataset, cfg: &SynthConfig) -> Result<SynthModel, SynthError> {
    match cfg.method {
        Method::Tvae => Ok(SynthModel::Tvae(fit_tvae(d, cfg)?)),
        Method::Ctgan => Ok(SynthModel::Ctgan(fit_ctgan(d, cfg)?)),
        Method::Independent => {
            cfg.validate()?;
            Ok(SynthModel::Independent(fit_independent_with_modes(
                d,
                cfg.max_modes,
                cfg.seed,
            )?))
        }
    }
}

/// Splits the encoded layout into tanh scalar positions and softmax spans,
/// the shape the generator output head needs.
pub(crate) fn span_layout(spec: &TransformSpec) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut tanh = Vec::new();
    let mut spans = Vec::new();
    for cs in spec.column_spans() {
        match cs {
            ColumnSpan::Numeric { scalar, modes } => {
                tanh.push(scalar);
                spans.push((modes.start, modes.end - modes.start));
            }
            ColumnSpan::Categorical { span } => {
                spans.push((span.start, span.end - span.start));
            }
        }
    }
    (tanh, spans)
}

/// Demotes the label column, if any, so the transform encodes it like any
/// other categorical. Returns the training view plus the label name needed
/// to promote it back after decoding.
pub(crate) fn demote_label(d: &Dataset) -> Result<(Dataset, Option<String>), SynthError> {
    match d.schema().label_index() {
        Some(idx) => {
            let name = d.schema().column(idx).name().to_string();
            Ok((d.label_as_feature()?, Some(name)))
        }
        None => Ok((d.clone(), None)),
    }
}

/// Re-promotes the label and stamps synthetic provenance on a decoded
/// sample.
pub(crate) fn finish_sample(d: Dataset, label: Option<&str>) -> Result<Dataset, SynthError> {
    let d = match label {
        Some(name) => d.column_as_label(name)?,
        None => d,
    };
    Ok(d.with_provenance(Provenance::Synthetic))
}

pub(crate) fn standard_normal_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
        .collect();
    Mat::from_vec(rows, cols, data).expect("sized above")
}

/// Draws an index from an explicit probability vector.
pub(crate) fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut target = rng.random::<f64>();
    for (i, &p) in probs.iter().enumerate() {
        if target < p {
            return i;
        }
        target -= p;
    }
    probs.len() - 1
}

/// Reconstruction loss of a decoded batch against its encoded target:
/// Gaussian negative log-likelihood on the tanh scalars (squared error
/// scaled by a learned per-scalar noise sigma, plus its ln sigma term)
/// and cross-entropy on the softmax spans, the whole sum scaled by
/// `weight` and averaged over rows. Returns dL/d(output) and dL/d(sigma).
///
/// The weight balances reconstruction against the KL term; at 1.0 a
/// binary fact costs exactly as much KL as it saves in cross-entropy
/// and the posterior can collapse. The noise sigmas keep scalar
/// dispersion honest: a decoder that emits conditional means leaves a
/// residual that sigma absorbs and sampling re-injects.
pub(crate) fn recon_loss_and_grad(
    out: &Mat,
    target: &Mat,
    tanh_positions: &[usize],
    sigmas: &[f64],
    spans: &[(usize, usize)],
    weight: f64,
) -> (f64, Mat, Vec<f64>) {
    const PROB_FLOOR: f64 = 1e-12;
    let n = out.rows() as f64;
    let mut d = Mat::zeros(out.rows(), out.cols());
    let mut d_sigma = vec![0.0; sigmas.len()];
    let mut loss = 0.0;
    for i in 0..out.rows() {
        let y = out.row(i);
        let t = target.row(i);
        let drow = d.row_mut(i);
        for (k, &p) in tanh_positions.iter().enumerate() {
            let s = sigmas[k];
            let diff = y[p] - t[p];
            loss += weight * (diff * diff / (2.0 * s * s) + s.ln());
            drow[p] = weight * diff / (s * s) / n;
            d_sigma[k] += weight * (1.0 / s - diff * diff / (s * s * s)) / n;
        }
        for &(start, len) in spans {
            for p in start..start + len {
                if t[p] != 0.0 {
                    let yp = y[p].max(PROB_FLOOR);
                    loss += -weight * t[p] * yp.ln();
                    drow[p] = -weight * t[p] / yp / n;
                }
            }
        }
    }
    (loss / n, d, d_sigma)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = SynthConfig::tvae();
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.batch_size, 500);
        assert_eq!(cfg.latent_dim, 128);
        assert_eq!(cfg.architecture, Architecture::A);
        cfg.validate().unwrap();

        let mut bad = SynthConfig::ctgan();
        bad.batch_size = 1;
        assert!(matches!(bad.validate(), Err(SynthError::BadConfig(_))));
        let mut bad = SynthConfig::tvae();
        bad.latent_dim = 0;
        assert!(matches!(bad.validate(), Err(SynthError::BadConfig(_))));
        let mut bad = SynthConfig::tvae();
        bad.epochs = 0;
        assert!(matches!(bad.validate(), Err(SynthError::BadConfig(_))));
    }

    #[test]
    fn recon_gradient_matches_finite_differences() {
        let tanh_positions = [0usize];
        let sigmas = [0.3];
        let spans = [(1usize, 3usize)];
        let target =
            Mat::from_rows(&[vec![0.4, 1.0, 0.0, 0.0], vec![-0.2, 0.0, 0.0, 1.0]]).unwrap();
        let out =
            Mat::from_rows(&[vec![0.1, 0.5, 0.3, 0.2], vec![0.6, 0.2, 0.7, 0.1]]).unwrap();
        let eval = |o: &Mat, s: &[f64]| recon_loss_and_grad(o, &target, &tanh_positions, s, &spans, 2.0);
        let (_, grad, grad_sigma) = eval(&out, &sigmas);
        let h = 1e-6;
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let mut up = out.clone();
                up.set(i, j, out.get(i, j) + h);
                let mut down = out.clone();
                down.set(i, j, out.get(i, j) - h);
                let numeric = (eval(&up, &sigmas).0 - eval(&down, &sigmas).0) / (2.0 * h);
                assert!(
                    (grad.get(i, j) - numeric).abs() < 1e-5,
                    "({i},{j}): {} vs {numeric}",
                    grad.get(i, j)
                );
            }
        }
        let numeric =
            (eval(&out, &[sigmas[0] + h]).0 - eval(&out, &[sigmas[0] - h]).0) / (2.0 * h);
        assert!(
            (grad_sigma[0] - numeric).abs() < 1e-5,
            "sigma: {} vs {numeric}",
            grad_sigma[0]
        );
    }

    #[test]
    fn sample_index_respects_the_distribution() {
        use rand::SeedableRng;
        let probs = [0.2, 0.5, 0.3];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; 3];
        for _ in 0..20_000 {
            counts[sample_index(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(&probs) {
            assert!((*c as f64 / 20_000.0 - p).abs() < 0.02);
        }
    }
}
