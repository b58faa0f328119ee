//! Seeded holdout splits and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, TabularError};

/// Splits rows into two disjoint parts at a shuffled cut.
///
/// The first part receives `round(fraction * n)` rows. The shuffle depends
/// only on the row count and the seed, so two datasets of equal length
/// split along the same row indices.
pub fn split_rows(
    data: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), TabularError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TabularError::BadFraction(fraction));
    }
    let n = data.n_rows();
    if n < 2 {
        return Err(TabularError::TooFewRows { need: 2, have: n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = (fraction * n as f64).round() as usize;
    Ok((data.subset(&indices[..cut]), data.subset(&indices[cut..])))
}

/// Assignment of each row to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    assignment: Vec<u32>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_of(&self, row: usize) -> u32 {
        self.assignment[row]
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f as usize] += 1;
        }
        sizes
    }

    /// Row indices held out for validation in `fold`.
    pub fn val_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row indices used for training in `fold`.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f as usize != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Assigns `n_rows` rows to `k` folds of near-equal size.
///
/// Rows are shuffled with the seed and dealt round-robin, so fold sizes
/// differ by at most one and the assignment is a pure function of
/// `(n_rows, k, seed)`.
pub fn kfold_partition(n_rows: usize, k: usize, seed: u64) -> Result<FoldAssignment, TabularError> {
    if k < 2 || k > n_rows {
        return Err(TabularError::BadFoldCount(k));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0u32; n_rows];
    for (j, &row) in order.iter().enumerate() {
        assignment[row] = (j % k) as u32;
    }
    Ok(FoldAssignment { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Cell, ColumnSchema, FeatureGroup, Schema};

    fn counting_dataset(n: usize) -> Dataset {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("id", FeatureGroup::Other).unwrap()
        ])
        .unwrap();
        let rows = (0..n).map(|i| vec![Cell::Num(i as f64)]).collect();
        Dataset::new(schema, rows).unwrap()
    }

    #[test]
    fn split_is_a_partition_with_rounded_cut() {
        let data = counting_dataset(103);
        let (a, b) = split_rows(&data, 0.3, 11).unwrap();
        assert_eq!(a.n_rows(), 31);
        assert_eq!(b.n_rows(), 72);
        let mut seen: Vec<f64> = a
            .numeric_column("id")
            .unwrap()
            .into_iter()
            .chain(b.numeric_column("id").unwrap())
            .collect();
        seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let expected: Vec<f64> = (0..103).map(|i| i as f64).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let data = counting_dataset(40);
        let (a1, _) = split_rows(&data, 0.5, 7).unwrap();
        let (a2, _) = split_rows(&data, 0.5, 7).unwrap();
        assert_eq!(a1.rows(), a2.rows());
        let (a3, _) = split_rows(&data, 0.5, 8).unwrap();
        assert_ne!(a1.rows(), a3.rows());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let data = counting_dataset(10);
        assert!(split_rows(&data, 0.0, 1).is_err());
        assert!(split_rows(&data, 1.0, 1).is_err());
        assert!(split_rows(&data, -0.2, 1).is_err());
    }

    #[test]
    fn folds_are_balanced_and_cover_all_rows() {
        let folds = kfold_partition(10, 3, 5).unwrap();
        let mut sizes = folds.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        for fold in 0..3 {
            let val = folds.val_indices(fold);
            let train = folds.train_indices(fold);
            assert_eq!(val.len() + train.len(), 10);
            assert!(val.iter().all(|i| !train.contains(i)));
        }
    }

    #[test]
    fn fold_assignment_depends_only_on_inputs() {
        let a = kfold_partition(57, 10, 42).unwrap();
        let b = kfold_partition(57, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = kfold_partition(57, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn fold_count_bounds() {
        assert!(kfold_partition(10, 1, 0).is_err());
        assert!(kfold_partition(10, 11, 0).is_err());
        assert!(kfold_partition(10, 10, 0).is_ok());
    }
}
