//! Deterministic K-way row partitions.

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fold id per row. Fold `k`'s test set is the rows assigned `k`; its
/// training set is every other row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

fn check(n: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::Validation(format!("K must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Validation(format!("K = {k} exceeds row count {n}")));
    }
    Ok(())
}

/// Shuffles `0..n` with `seed`, then deals the permutation into `k` contiguous
/// blocks; the first `n mod k` blocks get one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    check(n, k)?;
    let perm = Rng::new(seed).permutation(n);
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &perm[pos..pos + size] {
            assignments[row] = fold;
        }
        pos += size;
    }
    Ok(FoldPlan { k, assignments })
}

/// Class-stratified variant: each class is shuffled separately and the rows are
/// dealt round-robin, positives first, so fold sizes still differ by at most one.
pub fn stratified_kfold_split(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    check(labels.len(), k)?;
    let mut rng = Rng::new(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [1u8, 0] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut rows);
        order.extend(rows);
    }
    let mut assignments = vec![0; labels.len()];
    for (i, &row) in order.iter().enumerate() {
        assignments[row] = i % k;
    }
    Ok(FoldPlan { k, assignments })
}

impl FoldPlan {
    pub fn from_assignments(k: usize, assignments: Vec<usize>) -> Result<Self> {
        check(assignments.len(), k)?;
        if let Some(bad) = assignments.iter().find(|&&f| f >= k) {
            return Err(Error::Validation(format!("fold id {bad} outside [0, {k})")));
        }
        Ok(Self { k, assignments })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_rows(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    fn check_fold(&self, fold: usize) -> Result<()> {
        if fold >= self.k {
            return Err(Error::Validation(format!("fold {fold} outside [0, {})", self.k)));
        }
        Ok(())
    }

    pub fn test_indices(&self, fold: usize) -> Result<Vec<usize>> {
        self.check_fold(fold)?;
        Ok((0..self.n_rows()).filter(|&i| self.assignments[i] == fold).collect())
    }

    pub fn train_indices(&self, fold: usize) -> Result<Vec<usize>> {
        self.check_fold(fold)?;
        Ok((0..self.n_rows()).filter(|&i| self.assignments[i] != fold).collect())
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}
