//! Finite-difference verification of the analytic gradients.
//!
//! Central differences with h = 1e-4 give roughly eight significant digits
//! here, so an agreement threshold of 1e-3 relative error is comfortable
//! for correct gradients and far too tight for any structural mistake
//! (a wrong Jacobian shows up at whole orders of magnitude).

use super::loss::{backward_with_loss, loss_value, Loss};
use super::mat::Mat;
use super::net::{DenseNet, NeuralError};

/// Outcome of comparing analytic gradients against central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub params_checked: usize,
    pub max_rel_error: f64,
}

/// Compares every parameter's analytic gradient with a central finite
/// difference of the loss. Relative error uses `|a| + |n| + 1e-4` as the
/// denominator so that parameters with near-zero gradients are judged
/// against the resolution of the finite difference itself.
pub fn gradient_check(
    net: &mut DenseNet,
    batch: &Mat,
    loss: &Loss,
    h: f64,
) -> Result<GradCheck, NeuralError> {
    let (_, grads) = backward_with_loss(net, batch, loss)?;

    let mut max_rel_error = 0.0f64;
    let mut params_checked = 0;
    let probe = |analytic: f64,
                 read: &dyn Fn(&DenseNet) -> f64,
                 write: &mut dyn FnMut(&mut DenseNet, f64),
                 net: &mut DenseNet|
     -> Result<f64, NeuralError> {
        let original = read(net);
        write(net, original + h);
        let up = loss_value(net, batch, loss)?;
        write(net, original - h);
        let down = loss_value(net, batch, loss)?;
        write(net, original);
        let numeric = (up - down) / (2.0 * h);
        Ok((analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-4))
    };

    for li in 0..net.layers().len() {
        let w_len = grads.w[li].data().len();
        for wi in 0..w_len {
            let rel = probe(
                grads.w[li].data()[wi],
                &|n| n.weight_at(li, wi),
                &mut |n, v| n.set_weight(li, wi, v),
                net,
            )?;
            max_rel_error = max_rel_error.max(rel);
            params_checked += 1;
        }
        for bi in 0..grads.b[li].len() {
            let rel = probe(
                grads.b[li][bi],
                &|n| n.bias_at(li, bi),
                &mut |n, v| n.set_bias(li, bi, v),
                net,
            )?;
            max_rel_error = max_rel_error.max(rel);
            params_checked += 1;
        }
    }
    Ok(GradCheck {
        params_checked,
        max_rel_error,
    })
}
