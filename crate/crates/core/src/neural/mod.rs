//! Minimal dense-network core: matrices, layers with reverse-mode
//! gradients, span-aware output heads, losses, Adam, and a
//! finite-difference gradient check.
//!
//! The networks here are deliberately small in scope. They exist to power
//! the two deep tabular generators and nothing else, so the feature set is
//! exactly: affine layers, four elementwise activations plus a
//! softmax-per-span head, optional concat-residual wiring, and text
//! persistence.

pub mod check;
mod io;
mod loss;
mod mat;
mod net;

pub use io::{net_from_text, net_to_text};
pub use loss::{
    backward_with_loss, bce_loss, loss_value, loss_with_gradient, span_ce_loss, squared_loss,
    Loss,
};
pub use mat::{Mat, MatError};
pub use net::{
    adam_step, Activation, AdamState, DenseNet, Gradients, Layer, LayerSpec, NeuralError,
    SpanActivation, Trace,
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_drives_a_scalar_quadratic_to_its_optimum() {
        // One unit, identity activation, input fixed at 1: the output is
        // w + b and the squared loss pulls it to 3.
        let mut net = DenseNet::new(1, &[LayerSpec::new(1, Activation::Identity)], 0).unwrap();
        let batch = Mat::from_rows(&[vec![1.0]]).unwrap();
        let loss = Loss::Squared {
            target: Mat::from_rows(&[vec![3.0]]).unwrap(),
        };
        let mut adam = AdamState::new(&net, 0.01, 0.9, 0.999);
        for _ in 0..500 {
            let (_, grads) = backward_with_loss(&net, &batch, &loss).unwrap();
            adam_step(&mut net, &grads, &mut adam).unwrap();
        }
        let out = net.forward(&batch).unwrap().get(0, 0);
        assert!((out - 3.0).abs() < 1e-2, "converged to {out}");
    }

    #[test]
    fn separable_toy_problem_reaches_full_accuracy() {
        let spec = [
            LayerSpec::new(8, Activation::Relu),
            LayerSpec::new(1, Activation::Sigmoid),
        ];
        let mut net = DenseNet::new(2, &spec, 11).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 10.0;
            rows.push(vec![1.5 + t, 1.0 - 0.3 * t]);
            labels.push(1.0);
            rows.push(vec![-1.5 - t, -1.0 + 0.3 * t]);
            labels.push(0.0);
        }
        let batch = Mat::from_rows(&rows).unwrap();
        let loss = Loss::BinaryCrossEntropy {
            targets: labels.clone(),
        };
        let mut adam = AdamState::standard(&net);
        let mut reached = false;
        for _ in 0..2_000 {
            let (_, grads) = backward_with_loss(&net, &batch, &loss).unwrap();
            adam_step(&mut net, &grads, &mut adam).unwrap();
            let out = net.forward(&batch).unwrap();
            let correct = labels
                .iter()
                .enumerate()
                .filter(|(i, &y)| (out.get(*i, 0) >= 0.5) == (y == 1.0))
                .count();
            if correct == labels.len() {
                reached = true;
                break;
            }
        }
        assert!(reached, "did not separate the toy set within 2000 steps");
    }
}
