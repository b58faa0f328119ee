//! Newton-solved logistic regression with L2 on the weights.

use crate::neural::Mat;

use super::{sigmoid, FitConfig, ModelError};

const GRAD_TOL: f64 = 1e-6;
const STD_FLOOR: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 100;
const MAX_HALVINGS: usize = 40;

/// Fitted logistic classifier. Inputs are standardized internally with the
/// column statistics captured at fit time, so callers pass raw features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Vec<f64>,
    intercept: f64,
    means: Vec<f64>,
    stds: Vec<f64>,
    l2: f64,
}

impl LogisticModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_proba(&self, x: &Mat) -> Result<Vec<f64>, ModelError> {
        if x.cols() != self.weights.len() {
            return Err(ModelError::WidthMismatch {
                expected: self.weights.len(),
                found: x.cols(),
            });
        }
        let mut out = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = x.row(i);
            let mut z = self.intercept;
            for j in 0..row.len() {
                z += self.weights[j] * (row[j] - self.means[j]) / self.stds[j];
            }
            out.push(sigmoid(z));
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("logistic v1\n");
        s.push_str(&format!("features {}\n", self.weights.len()));
        s.push_str(&format!("l2 {}\n", self.l2));
        s.push_str(&format!("intercept {}\n", self.intercept));
        for j in 0..self.weights.len() {
            s.push_str(&format!(
                "feature {} {} {}\n",
                self.weights[j], self.means[j], self.stds[j]
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<LogisticModel, ModelError> {
        let err = |line: usize, msg: String| ModelError::Parse { line, msg };
        let mut lines = text.lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, Vec<String>), ModelError> {
            for (i, raw) in lines.by_ref() {
                let t = raw.trim();
                if t.is_empty() {
                    continue;
                }
                let fields: Vec<String> = t.split_whitespace().map(str::to_string).collect();
                if fields[0] != want {
                    return Err(err(i + 1, format!("expected `{want}`, found `{t}`")));
                }
                return Ok((i + 1, fields));
            }
            Err(err(0, format!("missing `{want}` line")))
        };
        let parse_f64 = |line: usize, s: &str| -> Result<f64, ModelError> {
            let v: f64 = s
                .parse()
                .map_err(|_| err(line, format!("bad float `{s}`")))?;
            if !v.is_finite() {
                return Err(err(line, format!("non-finite value `{s}`")));
            }
            Ok(v)
        };

        let (line, header) = next("logistic")?;
        if header.len() != 2 || header[1] != "v1" {
            return Err(err(line, "expected header `logistic v1`".into()));
        }
        let (line, f) = next("features")?;
        if f.len() != 2 {
            return Err(err(line, "expected `features <count>`".into()));
        }
        let n: usize = f[1]
            .parse()
            .map_err(|_| err(line, format!("bad count `{}`", f[1])))?;
        let (line, f) = next("l2")?;
        if f.len() != 2 {
            return Err(err(line, "expected `l2 <value>`".into()));
        }
        let l2 = parse_f64(line, &f[1])?;
        let (line, f) = next("intercept")?;
        if f.len() != 2 {
            return Err(err(line, "expected `intercept <value>`".into()));
        }
        let intercept = parse_f64(line, &f[1])?;

        let mut weights = Vec::with_capacity(n);
        let mut means = Vec::with_capacity(n);
        let mut stds = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, f) = next("feature")?;
            if f.len() != 4 {
                return Err(err(line, "expected `feature <weight> <mean> <std>`".into()));
            }
            weights.push(parse_f64(line, &f[1])?);
            means.push(parse_f64(line, &f[2])?);
            let s = parse_f64(line, &f[3])?;
            if s < STD_FLOOR {
                return Err(err(line, format!("std {s} below floor")));
            }
            stds.push(s);
        }
        if let Some((i, raw)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(i + 1, format!("trailing content `{}`", raw.trim())));
        }
        Ok(LogisticModel {
            weights,
            intercept,
            means,
            stds,
            l2,
        })
    }
}

struct Standardized {
    z: Mat,
    means: Vec<f64>,
    stds: Vec<f64>,
}

fn standardize(x: &Mat) -> Standardized {
    let (n, d) = (x.rows(), x.cols());
    let mut means = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..d {
            means[j] += row[j];
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..d {
            let dv = row[j] - means[j];
            stds[j] += dv * dv;
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n as f64).sqrt().max(STD_FLOOR);
    }
    let mut z = Mat::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            z.set(i, j, (x.get(i, j) - means[j]) / stds[j]);
        }
    }
    Standardized { z, means, stds }
}

fn penalized_nll(z: &Mat, y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let mut nll = 0.0;
    for i in 0..z.rows() {
        let row = z.row(i);
        let mut s = b;
        for j in 0..row.len() {
            s += w[j] * row[j];
        }
        nll += s.max(0.0) + (-s.abs()).exp().ln_1p() - f64::from(y[i]) * s;
    }
    nll + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Cholesky solve of `a x = rhs` for symmetric positive-definite `a`
/// (row-major, overwritten). Returns `None` when a pivot collapses.
fn cholesky_solve(a: &mut [f64], dim: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    for j in 0..dim {
        let mut pivot = a[j * dim + j];
        for k in 0..j {
            pivot -= a[j * dim + k] * a[j * dim + k];
        }
        if pivot <= 0.0 {
            return None;
        }
        let pivot = pivot.sqrt();
        a[j * dim + j] = pivot;
        for i in j + 1..dim {
            let mut v = a[i * dim + j];
            for k in 0..j {
                v -= a[i * dim + k] * a[j * dim + k];
            }
            a[i * dim + j] = v / pivot;
        }
    }
    let mut x = rhs.to_vec();
    for i in 0..dim {
        for k in 0..i {
            x[i] = x[i] - a[i * dim + k] * x[k];
        }
        x[i] /= a[i * dim + i];
    }
    for i in (0..dim).rev() {
        for k in i + 1..dim {
            x[i] = x[i] - a[k * dim + i] * x[k];
        }
        x[i] /= a[i * dim + i];
    }
    Some(x)
}

pub(super) fn fit(x: &Mat, y: &[u8], cfg: &FitConfig) -> Result<LogisticModel, ModelError> {
    let std = standardize(x);
    let (n, d) = (std.z.rows(), std.z.cols());
    let dim = d + 1;

    let mut theta = vec![0.0; dim];
    let mut nll = penalized_nll(&std.z, y, &theta[..d], theta[d], cfg.l2);
    for _ in 0..MAX_NEWTON_ITERS {
        let mut probs = Vec::with_capacity(n);
        for i in 0..n {
            let row = std.z.row(i);
            let mut s = theta[d];
            for j in 0..d {
                s += theta[j] * row[j];
            }
            probs.push(sigmoid(s));
        }

        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        for i in 0..n {
            let row = std.z.row(i);
            let r = probs[i] - f64::from(y[i]);
            let h = probs[i] * (1.0 - probs[i]);
            for j in 0..d {
                grad[j] += r * row[j];
                let hj = h * row[j];
                for k in 0..=j {
                    hess[j * dim + k] += hj * row[k];
                }
                hess[d * dim + j] += hj;
            }
            grad[d] += r;
            hess[d * dim + d] += h;
        }
        for j in 0..d {
            grad[j] += cfg.l2 * theta[j];
            hess[j * dim + j] += cfg.l2;
        }
        for v in hess.iter_mut().step_by(dim + 1) {
            *v += 1e-12;
        }
        for j in 0..dim {
            for k in 0..j {
                hess[k * dim + j] = hess[j * dim + k];
            }
        }

        if grad.iter().all(|g| g.abs() < GRAD_TOL) {
            break;
        }
        let Some(delta) = cholesky_solve(&mut hess, dim, &grad) else {
            break;
        };

        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = theta
                .iter()
                .zip(&delta)
                .map(|(t, dv)| t - step * dv)
                .collect();
            let trial_nll = penalized_nll(&std.z, y, &trial[..d], trial[d], cfg.l2);
            if trial_nll <= nll {
                theta = trial;
                nll = trial_nll;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let intercept = theta[d];
    theta.truncate(d);
    Ok(LogisticModel {
        weights: theta,
        intercept,
        means: std.means,
        stds: std.stds,
        l2: cfg.l2,
    })
}
