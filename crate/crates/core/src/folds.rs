//! Seeded k-fold assignment: uniform shuffle, then contiguous blocks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Assign each of `n` rows to one of `k` folds. Rows are shuffled with a
/// ChaCha8 stream seeded by `seed`, then cut into `k` contiguous blocks; the
/// first `n % k` blocks get one extra row.
pub fn assign_folds(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut folds = vec![0; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &order[pos..pos + size] {
            folds[row] = fold;
        }
        pos += size;
    }
    Ok(folds)
}

/// Rows whose fold differs from `fold`.
pub fn training_rows(folds: &[usize], fold: usize) -> Vec<usize> {
    (0..folds.len()).filter(|&i| folds[i] != fold).collect()
}

/// Rows assigned to `fold`.
pub fn held_out_rows(folds: &[usize], fold: usize) -> Vec<usize> {
    (0..folds.len()).filter(|&i| folds[i] == fold).collect()
}

/// Seeded train/test split holding out `round(n · test_fraction)` rows.
/// Both index lists are sorted.
pub fn holdout_split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_rows_evenly() {
        let folds = assign_folds(23, 5, 9).unwrap();
        let mut sizes = [0usize; 5];
        for &f in &folds {
            sizes[f] += 1;
        }
        assert_eq!(sizes, [5, 5, 5, 4, 4]);
        for f in 0..5 {
            let train = training_rows(&folds, f);
            let held = held_out_rows(&folds, f);
            assert_eq!(train.len() + held.len(), 23);
            assert!(train.iter().all(|r| !held.contains(r)));
        }
    }

    #[test]
    fn rejects_bad_k() {
        assert!(assign_folds(10, 1, 0).is_err());
        assert!(assign_folds(3, 4, 0).is_err());
    }

    #[test]
    fn holdout_split_partitions() {
        let (train, test) = holdout_split(50, 0.2, 4).unwrap();
        assert_eq!((train.len(), test.len()), (40, 10));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(holdout_split(50, 0.0, 4).unwrap().1, Vec::<usize>::new());
        assert!(holdout_split(50, 1.0, 4).is_err());
    }
}
