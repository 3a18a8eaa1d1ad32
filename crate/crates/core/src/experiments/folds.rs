use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Fold index per id, aligned with the id list it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub ids: Vec<String>,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Positions (into `ids`) of the rows in fold `f`.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.assignments[i] == f).collect()
    }

    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| self.assignments[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin assignment.
pub fn make_folds(ids: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return arg_err(format!("need at least 2 folds, got {k}"));
    }
    if k > ids.len() {
        return arg_err(format!("{k} folds requested for {} records", ids.len()));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        ids: ids.to_vec(),
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i}")).collect()
    }

    #[test]
    fn ten_into_five() {
        let plan = make_folds(&ids(10), 5, 1).unwrap();
        assert_eq!(plan.fold_sizes(), vec![2; 5]);
        assert_eq!(plan, make_folds(&ids(10), 5, 1).unwrap());
    }

    #[test]
    fn full_dataset_sizes() {
        let mut sizes = make_folds(&ids(10766), 5, 3).unwrap().fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2153, 2153, 2153, 2153, 2154]);
    }

    #[test]
    fn argument_errors() {
        assert!(make_folds(&ids(3), 4, 0).is_err());
        assert!(make_folds(&ids(3), 1, 0).is_err());
    }
}
