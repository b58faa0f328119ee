//! Dense feed-forward networks with reverse-mode gradients and Adam.
//!
//! A network is a stack of affine layers, each with an activation and an
//! optional residual flag. A residual layer emits
//! `concat(input, activation(Wx + b))`, so its output width is the input
//! width plus the unit count; this is the convention the deep generators
//! expect, and it lets consecutive widths differ.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::mat::Mat;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite {0} after update")]
    NonFinite(&'static str),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Softmax-per-span head with optional tanh positions.
///
/// Positions listed in `tanh_positions` get tanh; each `(start, len)` span
/// gets a softmax at the given temperature; everything else passes through
/// unchanged. Spans and tanh positions must not overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanActivation {
    tanh_positions: Vec<usize>,
    softmax_spans: Vec<(usize, usize)>,
    temperature: f64,
}

impl SpanActivation {
    pub fn new(
        tanh_positions: Vec<usize>,
        softmax_spans: Vec<(usize, usize)>,
        temperature: f64,
    ) -> Result<Self, NeuralError> {
        if temperature <= 0.0 || !temperature.is_finite() {
            return Err(NeuralError::Shape(format!(
                "softmax temperature must be positive, got {temperature}"
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in &tanh_positions {
            if !seen.insert(p) {
                return Err(NeuralError::Shape(format!("position {p} used twice")));
            }
        }
        for &(start, len) in &softmax_spans {
            if len == 0 {
                return Err(NeuralError::Shape("empty softmax span".into()));
            }
            for p in start..start + len {
                if !seen.insert(p) {
                    return Err(NeuralError::Shape(format!("position {p} used twice")));
                }
            }
        }
        Ok(SpanActivation {
            tanh_positions,
            softmax_spans,
            temperature,
        })
    }

    pub fn tanh_positions(&self) -> &[usize] {
        &self.tanh_positions
    }

    pub fn softmax_spans(&self) -> &[(usize, usize)] {
        &self.softmax_spans
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    fn max_position(&self) -> usize {
        let t = self.tanh_positions.iter().copied().max().map_or(0, |p| p + 1);
        let s = self
            .softmax_spans
            .iter()
            .map(|&(start, len)| start + len)
            .max()
            .unwrap_or(0);
        t.max(s)
    }

    /// Applies the head to a matrix of pre-activations.
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for &p in &self.tanh_positions {
                row[p] = row[p].tanh();
            }
            for &(start, len) in &self.softmax_spans {
                softmax_in_place(&mut row[start..start + len], self.temperature);
            }
        }
        out
    }

    /// Gradient of the head: given its output and dL/d(output), returns
    /// dL/d(pre-activation).
    pub fn backward(&self, output: &Mat, d_out: &Mat) -> Mat {
        let mut d_in = d_out.clone();
        for i in 0..d_in.rows() {
            let y = output.row(i);
            let row = d_in.row_mut(i);
            for &p in &self.tanh_positions {
                row[p] *= 1.0 - y[p] * y[p];
            }
            for &(start, len) in &self.softmax_spans {
                let ys = &y[start..start + len];
                let ds = &mut row[start..start + len];
                let dot: f64 = ds.iter().zip(ys).map(|(d, y)| d * y).sum();
                for (d, &yv) in ds.iter_mut().zip(ys) {
                    *d = yv * (*d - dot) / self.temperature;
                }
            }
        }
        d_in
    }
}

fn softmax_in_place(span: &mut [f64], temperature: f64) {
    let max = span.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in span.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        total += *v;
    }
    for v in span.iter_mut() {
        *v /= total;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    Spans(SpanActivation),
}

impl Activation {
    fn apply(&self, pre: Mat) -> Mat {
        match self {
            Activation::Identity => pre,
            Activation::Relu => pre.map(|v| v.max(0.0)),
            Activation::Tanh => pre.map(f64::tanh),
            Activation::Sigmoid => pre.map(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Spans(sa) => sa.apply(&pre),
        }
    }

    /// dL/d(pre) from the layer's own output and dL/d(output). All of the
    /// supported activations can be differentiated from their outputs.
    fn backward(&self, output: &Mat, d_out: &Mat) -> Mat {
        match self {
            Activation::Identity => d_out.clone(),
            Activation::Relu => {
                let mut d = d_out.clone();
                for (d, y) in d.data_mut().iter_mut().zip(output.data()) {
                    if *y <= 0.0 {
                        *d = 0.0;
                    }
                }
                d
            }
            Activation::Tanh => {
                let mut d = d_out.clone();
                for (d, y) in d.data_mut().iter_mut().zip(output.data()) {
                    *d *= 1.0 - y * y;
                }
                d
            }
            Activation::Sigmoid => {
                let mut d = d_out.clone();
                for (d, y) in d.data_mut().iter_mut().zip(output.data()) {
                    *d *= y * (1.0 - y);
                }
                d
            }
            Activation::Spans(sa) => sa.backward(output, d_out),
        }
    }
}

/// One affine layer. `w` is stored (units x fan_in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(super) w: Mat,
    pub(super) b: Vec<f64>,
    pub(super) activation: Activation,
    pub(super) residual: bool,
}

impl Layer {
    pub(super) fn from_parts(
        w: Mat,
        b: Vec<f64>,
        activation: Activation,
        residual: bool,
    ) -> Result<Layer, NeuralError> {
        if b.len() != w.rows() {
            return Err(NeuralError::Shape(format!(
                "bias length {} does not match {} units",
                b.len(),
                w.rows()
            )));
        }
        let out = if residual { w.cols() + w.rows() } else { w.rows() };
        if let Activation::Spans(sa) = &activation {
            if sa.max_position() > out {
                return Err(NeuralError::Shape(format!(
                    "span activation addresses position {} in a {out}-wide output",
                    sa.max_position()
                )));
            }
        }
        Ok(Layer {
            w,
            b,
            activation,
            residual,
        })
    }

    pub fn units(&self) -> usize {
        self.w.rows()
    }

    pub fn weights(&self) -> &Mat {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn activation(&self) -> &Activation {
        &self.activation
    }

    pub fn residual(&self) -> bool {
        self.residual
    }

    fn out_dim(&self) -> usize {
        if self.residual {
            self.fan_in() + self.units()
        } else {
            self.units()
        }
    }
}

/// Requested shape of one layer when building a net.
#[derive(Debug, Clone)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    pub residual: bool,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation) -> LayerSpec {
        LayerSpec {
            units,
            activation,
            residual: false,
        }
    }

    pub fn residual(units: usize, activation: Activation) -> LayerSpec {
        LayerSpec {
            units,
            activation,
            residual: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    input_dim: usize,
    layers: Vec<Layer>,
}

/// Per-layer activations kept from a forward pass; `activations[0]` is the
/// input batch and `activations[i + 1]` the output of layer i.
pub struct Trace {
    activations: Vec<Mat>,
}

impl Trace {
    pub fn output(&self) -> &Mat {
        self.activations.last().expect("trace holds the input")
    }
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(super) w: Vec<Mat>,
    pub(super) b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Gradients {
        Gradients {
            w: net
                .layers
                .iter()
                .map(|l| Mat::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            a.add_assign(b);
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.w {
            w.scale(s);
        }
        for b in &mut self.b {
            for v in b {
                *v *= s;
            }
        }
    }
}

impl DenseNet {
    /// Builds a net with Kaiming-uniform weights (bound sqrt(6 / fan_in))
    /// and zero biases, deterministically from the seed.
    pub fn new(input_dim: usize, specs: &[LayerSpec], seed: u64) -> Result<DenseNet, NeuralError> {
        if input_dim == 0 || specs.is_empty() {
            return Err(NeuralError::Shape("empty network".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        let mut dim = input_dim;
        for spec in specs {
            if spec.units == 0 {
                return Err(NeuralError::Shape("layer with zero units".into()));
            }
            let bound = (6.0 / dim as f64).sqrt();
            let data: Vec<f64> = (0..spec.units * dim)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            let layer = Layer::from_parts(
                Mat::from_vec(spec.units, dim, data).expect("sized above"),
                vec![0.0; spec.units],
                spec.activation.clone(),
                spec.residual,
            )?;
            dim = layer.out_dim();
            layers.push(layer);
        }
        Ok(DenseNet { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        let mut dim = self.input_dim;
        for l in &self.layers {
            dim = if l.residual { dim + l.units() } else { l.units() };
        }
        dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(super) fn from_parts(input_dim: usize, layers: Vec<Layer>) -> DenseNet {
        DenseNet { input_dim, layers }
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.rows() * l.w.cols() + l.b.len())
            .sum()
    }

    pub(crate) fn weight_at(&self, layer: usize, idx: usize) -> f64 {
        self.layers[layer].w.data()[idx]
    }

    pub(crate) fn set_weight(&mut self, layer: usize, idx: usize, v: f64) {
        self.layers[layer].w.data_mut()[idx] = v;
    }

    pub(crate) fn bias_at(&self, layer: usize, idx: usize) -> f64 {
        self.layers[layer].b[idx]
    }

    pub(crate) fn set_bias(&mut self, layer: usize, idx: usize, v: f64) {
        self.layers[layer].b[idx] = v;
    }

    pub fn forward(&self, batch: &Mat) -> Result<Mat, NeuralError> {
        let mut trace = self.forward_trace(batch)?;
        Ok(trace.activations.pop().expect("trace holds the input"))
    }

    pub fn forward_trace(&self, batch: &Mat) -> Result<Trace, NeuralError> {
        if batch.cols() != self.input_dim {
            return Err(NeuralError::Shape(format!(
                "batch width {} does not match input dimension {}",
                batch.cols(),
                self.input_dim
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let x = activations.last().expect("input pushed above");
            let mut pre = x.matmul_nt(&layer.w);
            pre.add_row_broadcast(&layer.b);
            let act = layer.activation.apply(pre);
            let out = if layer.residual {
                Mat::concat_cols(x, &act)
            } else {
                act
            };
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Reverse pass. Takes dL/d(output) and returns parameter gradients
    /// plus dL/d(input), which callers chaining networks feed backward.
    pub fn backward(&self, trace: &Trace, d_output: &Mat) -> Result<(Gradients, Mat), NeuralError> {
        let out = trace.output();
        if d_output.rows() != out.rows() || d_output.cols() != out.cols() {
            return Err(NeuralError::Shape(format!(
                "gradient shape {}x{} does not match output {}x{}",
                d_output.rows(),
                d_output.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut d_out = d_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.activations[i];
            let output = &trace.activations[i + 1];
            let in_dim = input.cols();
            let (d_pass, d_act, y_act);
            if layer.residual {
                d_pass = Some(d_out.slice_cols(0, in_dim));
                d_act = d_out.slice_cols(in_dim, d_out.cols());
                y_act = output.slice_cols(in_dim, output.cols());
            } else {
                d_pass = None;
                d_act = d_out;
                y_act = output.clone();
            }
            let d_pre = layer.activation.backward(&y_act, &d_act);
            grads.w[i] = d_pre.matmul_tn(input);
            grads.b[i] = d_pre.col_sums();
            let mut d_in = d_pre.matmul(&layer.w);
            if let Some(p) = d_pass {
                d_in.add_assign(&p);
            }
            d_out = d_in;
        }
        Ok((grads, d_out))
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &DenseNet, lr: f64, beta1: f64, beta2: f64) -> AdamState {
        AdamState {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    /// Defaults used for adversarial training.
    pub fn adversarial(net: &DenseNet) -> AdamState {
        AdamState::new(net, 2e-4, 0.5, 0.9)
    }

    /// Defaults used everywhere else.
    pub fn standard(net: &DenseNet) -> AdamState {
        AdamState::new(net, 1e-3, 0.9, 0.999)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with bias correction. Errors if shapes disagree or any
/// parameter leaves the finite range.
pub fn adam_step(
    net: &mut DenseNet,
    grads: &Gradients,
    state: &mut AdamState,
) -> Result<(), NeuralError> {
    if grads.w.len() != net.layers.len() {
        return Err(NeuralError::Shape("gradient layer count".into()));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (i, layer) in net.layers.iter_mut().enumerate() {
        if grads.w[i].rows() != layer.w.rows()
            || grads.w[i].cols() != layer.w.cols()
            || grads.b[i].len() != layer.b.len()
        {
            return Err(NeuralError::Shape(format!("gradient shape at layer {i}")));
        }
        update_slice(
            layer.w.data_mut(),
            grads.w[i].data(),
            state.m.w[i].data_mut(),
            state.v.w[i].data_mut(),
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
            bc1,
            bc2,
        );
        update_slice(
            &mut layer.b,
            &grads.b[i],
            &mut state.m.b[i],
            &mut state.v.b[i],
            state.lr,
            state.beta1,
            state.beta2,
            state.eps,
            bc1,
            bc2,
        );
        if !layer.w.is_finite() || !layer.b.iter().all(|v| v.is_finite()) {
            return Err(NeuralError::NonFinite("parameters"));
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_slice(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_layer(dim: usize) -> DenseNet {
        let mut net = DenseNet::new(
            dim,
            &[LayerSpec::new(dim, Activation::Identity)],
            0,
        )
        .unwrap();
        for i in 0..dim {
            for j in 0..dim {
                net.layers[0].w.set(i, j, if i == j { 1.0 } else { 0.0 });
            }
        }
        net
    }

    #[test]
    fn identity_net_reproduces_input() {
        let net = identity_layer(3);
        let x = Mat::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 4.0, 9.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap(), x);
    }

    #[test]
    fn relu_zeroes_negative_preactivations() {
        let mut net = identity_layer(2);
        net.layers[0].activation = Activation::Relu;
        let x = Mat::from_rows(&[vec![-1.0, -0.5]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn hand_computed_affine_and_residual() {
        let mut net = DenseNet::new(
            2,
            &[LayerSpec::residual(2, Activation::Identity)],
            0,
        )
        .unwrap();
        net.layers[0].w = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        net.layers[0].b = vec![0.5, -0.5];
        let x = Mat::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let out = net.forward(&x).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0, 5.5, 10.5]);
        assert_eq!(net.output_dim(), 4);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = identity_layer(3);
        let x = Mat::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(net.forward(&x).is_err());
    }

    #[test]
    fn span_activation_softmax_sums_to_one_and_sharpens_with_low_temperature() {
        let warm = SpanActivation::new(vec![0], vec![(1, 3)], 1.0).unwrap();
        let cold = SpanActivation::new(vec![0], vec![(1, 3)], 0.2).unwrap();
        let x = Mat::from_rows(&[vec![0.3, 1.0, 2.0, 0.5]]).unwrap();
        let yw = warm.apply(&x);
        let yc = cold.apply(&x);
        let sum_w: f64 = yw.row(0)[1..4].iter().sum();
        assert!((sum_w - 1.0).abs() < 1e-12);
        assert_eq!(yw.row(0)[0], 0.3f64.tanh());
        let peak_w = yw.row(0)[2];
        let peak_c = yc.row(0)[2];
        assert!(peak_c > peak_w, "lower temperature must sharpen the softmax");
    }

    #[test]
    fn span_activation_rejects_overlap() {
        assert!(SpanActivation::new(vec![1], vec![(1, 2)], 0.5).is_err());
        assert!(SpanActivation::new(vec![], vec![(0, 0)], 0.5).is_err());
        assert!(SpanActivation::new(vec![], vec![(0, 2)], 0.0).is_err());
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut net = DenseNet::new(3, &[LayerSpec::new(2, Activation::Tanh)], 1).unwrap();
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut adam = AdamState::standard(&net);
        adam_step(&mut net, &grads, &mut adam).unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn constant_gradient_moves_parameters_against_its_sign() {
        let mut net = DenseNet::new(1, &[LayerSpec::new(1, Activation::Identity)], 2).unwrap();
        let w0 = net.layers[0].w.get(0, 0);
        let mut grads = Gradients::zeros_like(&net);
        grads.w[0].set(0, 0, 0.5);
        let mut adam = AdamState::standard(&net);
        for _ in 0..10 {
            adam_step(&mut net, &grads, &mut adam).unwrap();
        }
        assert!(net.layers[0].w.get(0, 0) < w0);
    }

    #[test]
    fn net_construction_is_seeded() {
        let spec = [
            LayerSpec::residual(8, Activation::Relu),
            LayerSpec::new(4, Activation::Identity),
        ];
        let a = DenseNet::new(5, &spec, 42).unwrap();
        let b = DenseNet::new(5, &spec, 42).unwrap();
        let c = DenseNet::new(5, &spec, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers[0].b.iter().all(|&v| v == 0.0));
        let bound = (6.0f64 / 5.0).sqrt();
        assert!(a.layers[0].w.data().iter().all(|v| v.abs() < bound));
    }
}
