//! One-dimensional Gaussian mixture fitting for mode-specific
//! normalization.
//!
//! For each candidate mode count k the data is fitted by
//! expectation-maximization from a seeded k-means++ initialization, and the
//! winner is picked by BIC (a k-component model spends 3k-1 parameters).
//! Components lighter than the weight floor are pruned afterwards. BIC
//! model selection is what keeps a well-separated two-bump mixture at two
//! modes instead of letting EM shave a big cluster into slivers that all
//! survive the floor.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::seed;

pub const STD_FLOOR: f64 = 1e-6;
pub const WEIGHT_FLOOR: f64 = 0.005;

const MAX_EM_ITER: usize = 200;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One Gaussian component of a fitted mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub mean: f64,
    pub std: f64,
    pub weight: f64,
}

struct Fit {
    modes: Vec<Mode>,
    loglik: f64,
}

/// Fits a mixture with up to `max_modes` components and returns the pruned,
/// mean-sorted mode list. Deterministic in `(x, max_modes, seed)`.
pub fn fit_modes(x: &[f64], max_modes: usize, seed: u64) -> Vec<Mode> {
    assert!(!x.is_empty() && max_modes >= 1);
    let n = x.len() as f64;

    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() == 1 {
        return vec![Mode {
            mean: distinct[0],
            std: STD_FLOOR,
            weight: 1.0,
        }];
    }
    let k_max = max_modes.min(distinct.len());

    let mut best: Option<(f64, Fit)> = None;
    for k in 1..=k_max {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(seed, &format!("gmm-k{k}")));
        let fit = em_fit(x, k, &mut rng);
        let bic = -2.0 * fit.loglik + (3.0 * k as f64 - 1.0) * n.ln();
        let better = match &best {
            None => true,
            Some((b, _)) => bic < *b,
        };
        if better {
            best = Some((bic, fit));
        }
    }

    let mut modes = best.expect("at least one candidate").1.modes;
    modes.retain(|m| m.weight >= WEIGHT_FLOOR);
    if modes.is_empty() {
        // Cannot happen with k_max <= 200 since some weight is >= 1/k, but
        // keep a safe fallback.
        let mean = x.iter().sum::<f64>() / n;
        modes.push(Mode {
            mean,
            std: STD_FLOOR,
            weight: 1.0,
        });
    }
    let total: f64 = modes.iter().map(|m| m.weight).sum();
    for m in &mut modes {
        m.weight /= total;
        m.std = m.std.max(STD_FLOOR);
    }
    modes.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    modes
}

fn em_fit(x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Fit {
    let n = x.len();
    let mut means = kmeanspp_init(x, k, rng);
    let global_mean = x.iter().sum::<f64>() / n as f64;
    let global_var = x.iter().map(|v| (v - global_mean).powi(2)).sum::<f64>() / n as f64;
    let init_std = (global_var.sqrt() / k as f64).max(STD_FLOOR);
    let mut stds = vec![init_std; k];
    let mut weights = vec![1.0 / k as f64; k];

    let mut loglik = f64::NEG_INFINITY;
    let mut logp = vec![0.0f64; k];
    for _ in 0..MAX_EM_ITER {
        let mut nk = vec![0.0f64; k];
        let mut sum = vec![0.0f64; k];
        let mut sumsq = vec![0.0f64; k];
        let mut ll = 0.0;
        for &xi in x {
            let mut max_lp = f64::NEG_INFINITY;
            for m in 0..k {
                let z = (xi - means[m]) / stds[m];
                logp[m] = weights[m].max(1e-300).ln() - stds[m].ln() - 0.5 * (LN_2PI + z * z);
                max_lp = max_lp.max(logp[m]);
            }
            let lse = max_lp + logp.iter().map(|lp| (lp - max_lp).exp()).sum::<f64>().ln();
            ll += lse;
            for m in 0..k {
                let r = (logp[m] - lse).exp();
                nk[m] += r;
                sum[m] += r * xi;
                sumsq[m] += r * xi * xi;
            }
        }
        for m in 0..k {
            let denom = nk[m].max(1e-12);
            weights[m] = nk[m] / n as f64;
            means[m] = sum[m] / denom;
            let var = (sumsq[m] / denom - means[m] * means[m]).max(0.0);
            stds[m] = var.sqrt().max(STD_FLOOR);
        }
        if (ll - loglik).abs() < 1e-7 * n as f64 {
            loglik = ll;
            break;
        }
        loglik = ll;
    }

    let modes = (0..k)
        .map(|m| Mode {
            mean: means[m],
            std: stds[m],
            weight: weights[m],
        })
        .collect();
    Fit { modes, loglik }
}

fn kmeanspp_init(x: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut means = Vec::with_capacity(k);
    means.push(x[rng.random_range(0..x.len())]);
    let mut d2: Vec<f64> = x.iter().map(|v| (v - means[0]).powi(2)).collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = x.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            x[pick]
        } else {
            x[rng.random_range(0..x.len())]
        };
        means.push(next);
        for (i, v) in x.iter().enumerate() {
            d2[i] = d2[i].min((v - next).powi(2));
        }
    }
    means
}
