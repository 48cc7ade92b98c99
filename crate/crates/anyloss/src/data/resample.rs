//! Resampling baselines: random under-sampling and SMOTE over-sampling.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

fn split_classes(d: &Dataset) -> (Vec<usize>, Vec<usize>) {
    // (majority, minority); ties treat the negatives as majority.
    let pos: Vec<usize> = (0..d.n()).filter(|&i| d.y[i] == 1).collect();
    let neg: Vec<usize> = (0..d.n()).filter(|&i| d.y[i] == 0).collect();
    if pos.len() > neg.len() {
        (pos, neg)
    } else {
        (neg, pos)
    }
}

/// Uniformly deletes majority samples until the majority:minority ratio
/// reaches `target_ratio`. The minority class is never touched; a target
/// above the current ratio (which would need minority deletion) is an
/// error, and a target equal to it is the identity.
pub fn random_undersample(d: &Dataset, target_ratio: f64, seed: u64) -> Result<Dataset> {
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(Error::contract(format!(
            "target ratio must be positive, got {target_ratio}"
        )));
    }
    let (majority, minority) = split_classes(d);
    if minority.is_empty() {
        return Err(Error::contract("undersampling needs both classes present"));
    }
    let keep_majority = (target_ratio * minority.len() as f64).round() as usize;
    if keep_majority == majority.len() {
        return Ok(d.clone());
    }
    if keep_majority > majority.len() {
        return Err(Error::contract(format!(
            "target ratio {target_ratio} exceeds the current ratio {:.4}; \
             undersampling can only delete majority samples",
            majority.len() as f64 / minority.len() as f64
        )));
    }
    if keep_majority == 0 {
        return Err(Error::contract(
            "target ratio would delete the entire majority class",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = majority.clone();
    shuffled.shuffle(&mut rng);
    let mut keep: Vec<usize> = shuffled[..keep_majority]
        .iter()
        .chain(minority.iter())
        .copied()
        .collect();
    keep.sort_unstable();
    Ok(d.subset(&keep, format!("{}_rus", d.name)))
}

/// SMOTE: synthesizes minority samples on segments between existing
/// minority points and their nearest minority neighbours until the
/// majority:minority ratio drops to `target_ratio`.
///
/// Each synthetic point is `x + λ (x_nn - x)` with `λ ~ U(0,1)` and `x_nn`
/// drawn among the `k_neighbors` nearest minority neighbours of `x`
/// (Euclidean distance). Requires more minority samples than neighbours.
pub fn smote(d: &Dataset, k_neighbors: usize, target_ratio: f64, seed: u64) -> Result<Dataset> {
    if !(target_ratio.is_finite() && target_ratio > 0.0) {
        return Err(Error::contract(format!(
            "target ratio must be positive, got {target_ratio}"
        )));
    }
    if k_neighbors == 0 {
        return Err(Error::contract("need at least one neighbour"));
    }
    let (majority, minority) = split_classes(d);
    if minority.len() <= k_neighbors {
        return Err(Error::contract(format!(
            "SMOTE needs more than {k_neighbors} minority samples, found {}",
            minority.len()
        )));
    }
    let target_minority = (majority.len() as f64 / target_ratio).round() as usize;
    if target_minority <= minority.len() {
        // Already at or past the requested balance.
        return Ok(d.clone());
    }
    let n_synthetic = target_minority - minority.len();
    let minority_label = d.y[minority[0]];
    let m = d.m();

    // All-pairs neighbour lists; minority classes are small at this scale.
    let dist2 = |a: usize, b: usize| -> f64 {
        (0..m)
            .map(|j| {
                let diff = d.x[[a, j]] - d.x[[b, j]];
                diff * diff
            })
            .sum()
    };
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&a| {
            let mut others: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| (dist2(a, b), b))
                .collect();
            others.sort_by(|x, y| x.0.total_cmp(&y.0));
            others.truncate(k_neighbors);
            others.into_iter().map(|(_, b)| b).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<f64> = Vec::with_capacity(n_synthetic * m);
    for _ in 0..n_synthetic {
        let pick = rng.gen_range(0..minority.len());
        let base = minority[pick];
        let nn = neighbours[pick][rng.gen_range(0..neighbours[pick].len())];
        let lambda: f64 = rng.gen_range(0.0..1.0);
        for j in 0..m {
            let a = d.x[[base, j]];
            let b = d.x[[nn, j]];
            rows.push(a + lambda * (b - a));
        }
    }
    let synthetic = Array2::from_shape_vec((n_synthetic, m), rows).expect("shape matches");
    let x = ndarray::concatenate(Axis(0), &[d.x.view(), synthetic.view()])
        .expect("matching column counts");
    let mut y = d.y.clone();
    y.extend(std::iter::repeat_n(minority_label, n_synthetic));
    Dataset::new(x, y, format!("{}_smote", d.name))
}
