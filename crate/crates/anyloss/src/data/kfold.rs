//! Stratified k-fold splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A partition of `0..n` into `k` disjoint validation folds with per-class
/// counts balanced to within one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Validation indices of fold `fold`.
    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Training indices of fold `fold`: everything outside the fold.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.folds.iter()
    }
}

/// Assigns each class round-robin to folds after a seeded shuffle, so the
/// per-fold positive counts differ from `n_pos / k` by less than one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::contract(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::contract(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    if (!pos.is_empty() && pos.len() < k) || (!neg.is_empty() && neg.len() < k) {
        log::warn!(
            "a class has fewer members than folds ({} pos / {} neg vs k={k}); \
             some folds will miss it",
            pos.len(),
            neg.len()
        );
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut folds = vec![Vec::new(); k];
    for (i, idx) in pos.iter().enumerate() {
        folds[i % k].push(*idx);
    }
    // Start the negative round-robin where the positive one stopped so
    // fold sizes stay balanced when the counts are not multiples of k.
    let offset = pos.len() % k;
    for (i, idx) in neg.iter().enumerate() {
        folds[(offset + i) % k].push(*idx);
    }
    Ok(FoldPlan { folds })
}
