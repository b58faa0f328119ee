//! Random-graph generators for the borrower network.
//!
//! Only degrees and per-node neighbourhood aggregates leave this module;
//! the edge list itself is discarded after sampling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Random-graph family used to wire borrowers together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphModel {
    /// Every unordered pair is an edge independently with probability `p`.
    ErdosRenyi { p: f64 },
    /// Each node attaches `m` edges with preference for well-connected
    /// targets, giving the heavy-tailed degrees of social networks.
    /// Self-loops and repeated edges are kept; they are rare and each
    /// loop still contributes two degree endpoints.
    BarabasiAlbert { m: usize },
}

impl GraphModel {
    pub(super) fn validate(&self, n: usize) -> Result<(), SimError> {
        match *self {
            GraphModel::ErdosRenyi { p } => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(SimError::BadConfig(format!(
                        "erdos-renyi edge probability must lie in (0, 1), got {p}"
                    )));
                }
            }
            GraphModel::BarabasiAlbert { m } => {
                if m == 0 || m >= n {
                    return Err(SimError::BadConfig(format!(
                        "barabasi-albert attachment count must satisfy 1 <= m < n, got m={m} for n={n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-node network summary retained for feature synthesis.
pub(super) struct Neighborhood {
    pub degrees: Vec<u32>,
    /// Mean degree over each node's neighbours; 0 for isolated nodes.
    pub mean_neighbor_degree: Vec<f64>,
}

/// Samples a graph and returns the degree of every node.
///
/// Erdős–Rényi degrees concentrate around `p(n-1)`; Barabási–Albert
/// degrees are heavy-tailed with minimum `m`. The sum of degrees is even.
pub fn degree_sequence(n: usize, model: &GraphModel, seed: u64) -> Result<Vec<u32>, SimError> {
    Ok(sample_neighborhood(n, model, seed)?.degrees)
}

pub(super) fn sample_neighborhood(
    n: usize,
    model: &GraphModel,
    seed: u64,
) -> Result<Neighborhood, SimError> {
    if n < 2 {
        return Err(SimError::BadConfig(format!(
            "a borrower graph needs at least 2 nodes, got {n}"
        )));
    }
    model.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = match *model {
        GraphModel::ErdosRenyi { p } => erdos_renyi_edges(n, p, &mut rng),
        GraphModel::BarabasiAlbert { m } => barabasi_albert_edges(n, m, &mut rng),
    };

    let mut degrees = vec![0u32; n];
    for &(a, b) in &edges {
        degrees[a] += 1;
        degrees[b] += 1;
    }
    let mut sums = vec![0u64; n];
    let mut counts = vec![0u32; n];
    for &(a, b) in &edges {
        sums[a] += u64::from(degrees[b]);
        counts[a] += 1;
        sums[b] += u64::from(degrees[a]);
        counts[b] += 1;
    }
    let mean_neighbor_degree = (0..n)
        .map(|i| {
            if counts[i] == 0 {
                0.0
            } else {
                sums[i] as f64 / f64::from(counts[i])
            }
        })
        .collect();

    Ok(Neighborhood {
        degrees,
        mean_neighbor_degree,
    })
}

/// Geometric-skip sampling over the ordered pair list; visits each edge
/// candidate (v, w) with w < v exactly once in O(edges) time.
fn erdos_renyi_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let log_q = (1.0 - p).ln();
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        let r: f64 = rng.random();
        let skip = ((1.0 - r).ln() / log_q).floor() as i64;
        w += 1 + skip;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((v, w as usize));
        }
    }
    edges
}

/// Preferential attachment via the repeated-endpoint list: picking a
/// uniform entry of the stub list is proportional to current degree.
fn barabasi_albert_edges(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut stubs: Vec<usize> = Vec::with_capacity(2 * m * n);
    let mut edges = Vec::with_capacity(m * n);
    for v in 0..n {
        for _ in 0..m {
            stubs.push(v);
            let pick = stubs[rng.random_range(0..stubs.len())];
            stubs.push(pick);
            edges.push((v, pick));
        }
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erdos_renyi_mean_degree_matches_the_binomial_expectation() {
        let degrees = degree_sequence(1000, &GraphModel::ErdosRenyi { p: 0.01 }, 71).unwrap();
        let mean = degrees.iter().map(|&d| f64::from(d)).sum::<f64>() / 1000.0;
        assert!(
            (mean - 9.99).abs() <= 0.5,
            "expected mean degree near 9.99, got {mean}"
        );
    }

    #[test]
    fn barabasi_albert_respects_the_attachment_floor() {
        let degrees = degree_sequence(800, &GraphModel::BarabasiAlbert { m: 2 }, 5).unwrap();
        assert!(degrees.iter().all(|&d| d >= 2));
        let max = *degrees.iter().max().unwrap();
        assert!(max > 20, "hub degree {max} too small for preferential attachment");
    }

    #[test]
    fn degree_sums_are_even_for_both_families() {
        for (model, seed) in [
            (GraphModel::ErdosRenyi { p: 0.02 }, 3u64),
            (GraphModel::BarabasiAlbert { m: 3 }, 4u64),
        ] {
            let degrees = degree_sequence(500, &model, seed).unwrap();
            let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
            assert_eq!(total % 2, 0, "handshake violated for {model:?}");
        }
    }

    #[test]
    fn sequences_are_deterministic_per_seed() {
        let model = GraphModel::BarabasiAlbert { m: 2 };
        let a = degree_sequence(300, &model, 9).unwrap();
        let b = degree_sequence(300, &model, 9).unwrap();
        let c = degree_sequence(300, &model, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(degree_sequence(10, &GraphModel::ErdosRenyi { p: 0.0 }, 1).is_err());
        assert!(degree_sequence(10, &GraphModel::ErdosRenyi { p: 1.0 }, 1).is_err());
        assert!(degree_sequence(10, &GraphModel::BarabasiAlbert { m: 0 }, 1).is_err());
        assert!(degree_sequence(10, &GraphModel::BarabasiAlbert { m: 10 }, 1).is_err());
        assert!(degree_sequence(1, &GraphModel::ErdosRenyi { p: 0.5 }, 1).is_err());
    }

    #[test]
    fn isolated_nodes_get_a_zero_neighbor_aggregate() {
        let hood = sample_neighborhood(400, &GraphModel::ErdosRenyi { p: 0.002 }, 13).unwrap();
        let isolated: Vec<usize> = (0..400).filter(|&i| hood.degrees[i] == 0).collect();
        assert!(!isolated.is_empty(), "p=0.002 on 400 nodes should leave isolates");
        for i in isolated {
            assert_eq!(hood.mean_neighbor_degree[i], 0.0);
        }
    }
}
