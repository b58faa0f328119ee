//! Loss functions and the loss-level backward entry point.
//!
//! Each loss returns its value together with dL/d(output), which plugs
//! straight into [`DenseNet::backward`]. Values are averaged over the
//! batch (rows), so gradient magnitudes do not scale with batch size.

use super::mat::Mat;
use super::net::{DenseNet, Gradients, NeuralError};

/// A loss paired with everything needed to evaluate it against a net's
/// output batch.
#[derive(Debug, Clone)]
pub enum Loss {
    /// Sum of squared errors over all output entries, averaged over rows.
    Squared { target: Mat },
    /// Binary cross-entropy against probabilities in the single output
    /// column. Targets may be soft (any value in [0, 1]).
    BinaryCrossEntropy { targets: Vec<f64> },
    /// Cross-entropy of one-hot targets against already-softmaxed spans;
    /// positions outside the spans are ignored.
    SpanCrossEntropy {
        target: Mat,
        spans: Vec<(usize, usize)>,
    },
}

const PROB_FLOOR: f64 = 1e-12;

/// Squared-error loss: value and gradient with respect to `out`.
pub fn squared_loss(out: &Mat, target: &Mat) -> Result<(f64, Mat), NeuralError> {
    if out.rows() != target.rows() || out.cols() != target.cols() {
        return Err(NeuralError::Shape("squared loss target shape".into()));
    }
    let n = out.rows() as f64;
    let mut d = Mat::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for ((dv, &o), &t) in d.data_mut().iter_mut().zip(out.data()).zip(target.data()) {
        let diff = o - t;
        loss += diff * diff;
        *dv = 2.0 * diff / n;
    }
    Ok((loss / n, d))
}

/// Binary cross-entropy on a single column of probabilities.
pub fn bce_loss(out: &Mat, targets: &[f64]) -> Result<(f64, Mat), NeuralError> {
    if out.cols() != 1 || out.rows() != targets.len() {
        return Err(NeuralError::Shape("bce output must be n x 1".into()));
    }
    let n = out.rows() as f64;
    let mut d = Mat::zeros(out.rows(), 1);
    let mut loss = 0.0;
    for i in 0..out.rows() {
        let p = out.get(i, 0).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let y = targets[i];
        loss += -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        d.set(i, 0, (p - y) / (p * (1.0 - p)) / n);
    }
    Ok((loss / n, d))
}

/// Cross-entropy over softmaxed spans against one-hot targets.
pub fn span_ce_loss(
    out: &Mat,
    target: &Mat,
    spans: &[(usize, usize)],
) -> Result<(f64, Mat), NeuralError> {
    if out.rows() != target.rows() || out.cols() != target.cols() {
        return Err(NeuralError::Shape("span cross-entropy target shape".into()));
    }
    let n = out.rows() as f64;
    let mut d = Mat::zeros(out.rows(), out.cols());
    let mut loss = 0.0;
    for i in 0..out.rows() {
        let y = out.row(i);
        let t = target.row(i);
        let drow = d.row_mut(i);
        for &(start, len) in spans {
            for p in start..start + len {
                if t[p] != 0.0 {
                    let yp = y[p].max(PROB_FLOOR);
                    loss += -t[p] * yp.ln();
                    drow[p] = -t[p] / yp / n;
                }
            }
        }
    }
    Ok((loss / n, d))
}

/// Evaluates a loss against a net's output on `batch`.
pub fn loss_value(net: &DenseNet, batch: &Mat, loss: &Loss) -> Result<f64, NeuralError> {
    let out = net.forward(batch)?;
    Ok(loss_with_gradient(&out, loss)?.0)
}

/// Loss value and dL/d(output) for an already computed output batch.
pub fn loss_with_gradient(out: &Mat, loss: &Loss) -> Result<(f64, Mat), NeuralError> {
    match loss {
        Loss::Squared { target } => squared_loss(out, target),
        Loss::BinaryCrossEntropy { targets } => bce_loss(out, targets),
        Loss::SpanCrossEntropy { target, spans } => span_ce_loss(out, target, spans),
    }
}

/// Full backward pass: loss value plus parameter gradients.
pub fn backward_with_loss(
    net: &DenseNet,
    batch: &Mat,
    loss: &Loss,
) -> Result<(f64, Gradients), NeuralError> {
    let trace = net.forward_trace(batch)?;
    let (value, d_out) = loss_with_gradient(trace.output(), loss)?;
    let (grads, _) = net.backward(&trace, &d_out)?;
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::net::{Activation, LayerSpec};

    #[test]
    fn zero_net_with_zero_targets_has_zero_gradient() {
        let mut net = DenseNet::new(2, &[LayerSpec::new(2, Activation::Identity)], 3).unwrap();
        for v in net.params_mut() {
            *v = 0.0;
        }
        let batch = Mat::from_rows(&[vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let loss = Loss::Squared {
            target: Mat::zeros(2, 2),
        };
        let (value, grads) = backward_with_loss(&net, &batch, &loss).unwrap();
        assert_eq!(value, 0.0);
        for g in &grads.w {
            assert!(g.data().iter().all(|&v| v == 0.0));
        }
        for g in &grads.b {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn bce_is_stationary_when_output_equals_target() {
        // Zero weights and bias put the sigmoid at exactly 0.5; soft
        // targets of 0.5 make that a perfect fit.
        let mut net = DenseNet::new(3, &[LayerSpec::new(1, Activation::Sigmoid)], 4).unwrap();
        for v in net.params_mut() {
            *v = 0.0;
        }
        let batch = Mat::from_rows(&[vec![0.2, -0.4, 1.0], vec![1.5, 0.0, -2.0]]).unwrap();
        let loss = Loss::BinaryCrossEntropy {
            targets: vec![0.5, 0.5],
        };
        let (_, grads) = backward_with_loss(&net, &batch, &loss).unwrap();
        for g in &grads.b {
            assert!(g.iter().all(|&v| v.abs() < 1e-12));
        }
        for g in &grads.w {
            assert!(g.data().iter().all(|&v| v.abs() < 1e-12));
        }
    }
}
