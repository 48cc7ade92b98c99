//! Cross-validation harness, winner counting, learning-speed analysis, and
//! the amplifying-scale sweep.

mod signtest;

pub use signtest::{bayesian_sign_test, SignTestResult};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confusion::{hard_confusion, MetricKind};
use crate::data::{stratified_kfold, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::loss::{LossKind, LossSpec};
use crate::network::{train, Network, NetworkConfig, TrainConfig};
use crate::rng::derive_seed;

/// Hard-metric scores of one validation fold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FoldScore {
    pub accuracy: f64,
    pub f_beta: f64,
    pub g_mean: f64,
    pub balanced_accuracy: f64,
    /// Set when any metric hit a vanishing denominator on this fold.
    pub degenerate: bool,
    pub seconds: f64,
}

/// Mean of the four hard metrics across folds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanScores {
    pub accuracy: f64,
    pub f_beta: f64,
    pub g_mean: f64,
    pub balanced_accuracy: f64,
}

impl MeanScores {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::FBeta(_) => self.f_beta,
            MetricKind::GMean => self.g_mean,
            MetricKind::BalancedAccuracy => self.balanced_accuracy,
        }
    }
}

/// Cross-validation outcome: per-fold validation scores, their means, the
/// fold-averaged loss curve, and timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CVReport {
    /// Beta used for the reported F-score column (from the trained loss
    /// when it targets F-beta, otherwise 1).
    pub beta: f64,
    pub folds: Vec<FoldScore>,
    pub mean: MeanScores,
    /// Elementwise mean of the per-fold training loss curves.
    pub mean_loss_curve: Vec<f64>,
    pub mean_seconds_per_epoch: f64,
}

/// Trains and scores one loss spec with stratified k-fold cross-validation.
///
/// Per fold: feature standardization is fitted on the training split only,
/// the network trains on the standardized training split, and the four
/// hard metrics are computed on the held-out fold. Folds run in parallel;
/// every fold derives its own RNG streams from `(seed, fold)` so the
/// result does not depend on scheduling.
pub fn cross_validate(
    d: &Dataset,
    nc: &NetworkConfig,
    tc: &TrainConfig,
    k: usize,
) -> Result<CVReport> {
    let plan = stratified_kfold(&d.y, k, derive_seed(tc.seed, 0))?;
    let beta = match tc.loss.kind {
        LossKind::AnyLoss(MetricKind::FBeta(b)) => b,
        _ => 1.0,
    };

    let folds: Vec<(FoldScore, Vec<f64>, f64)> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<(FoldScore, Vec<f64>, f64)> {
            let started = Instant::now();
            let train_idx = plan.training(fold);
            let val_idx = plan.validation(fold);

            let x_train = d.x.select(ndarray::Axis(0), &train_idx);
            let y_train: Vec<u8> = train_idx.iter().map(|&i| d.y[i]).collect();
            let x_val = d.x.select(ndarray::Axis(0), val_idx);
            let y_val: Vec<u8> = val_idx.iter().map(|&i| d.y[i]).collect();

            let scaler = Standardizer::fit(&x_train);
            let x_train = scaler.transform(&x_train);
            let x_val = scaler.transform(&x_val);

            let net = Network::init(&NetworkConfig {
                seed: derive_seed(nc.seed, 1 + 2 * fold as u64),
                ..*nc
            })?;
            let fold_tc = TrainConfig {
                seed: derive_seed(tc.seed, 2 + 2 * fold as u64),
                ..*tc
            };
            let report = train(net, x_train.view(), &y_train, &fold_tc)?;

            let (_, predicted) = report.network.predict(x_val.view())?;
            let cells = hard_confusion(&y_val, &predicted)?;
            let acc = cells.score(MetricKind::Accuracy)?;
            let fb = cells.score(MetricKind::FBeta(beta))?;
            let gm = cells.score(MetricKind::GMean)?;
            let ba = cells.score(MetricKind::BalancedAccuracy)?;
            let score = FoldScore {
                accuracy: acc.value,
                f_beta: fb.value,
                g_mean: gm.value,
                balanced_accuracy: ba.value,
                degenerate: acc.degenerate || fb.degenerate || gm.degenerate || ba.degenerate,
                seconds: started.elapsed().as_secs_f64(),
            };
            Ok((score, report.loss_curve, report.wall_time_per_epoch))
        })
        .collect::<Result<Vec<_>>>()?;

    let kf = k as f64;
    let mean = MeanScores {
        accuracy: folds.iter().map(|f| f.0.accuracy).sum::<f64>() / kf,
        f_beta: folds.iter().map(|f| f.0.f_beta).sum::<f64>() / kf,
        g_mean: folds.iter().map(|f| f.0.g_mean).sum::<f64>() / kf,
        balanced_accuracy: folds.iter().map(|f| f.0.balanced_accuracy).sum::<f64>() / kf,
    };
    let epochs = folds[0].1.len();
    let mean_loss_curve: Vec<f64> = (0..epochs)
        .map(|e| folds.iter().map(|f| f.1[e]).sum::<f64>() / kf)
        .collect();
    let mean_seconds_per_epoch = folds.iter().map(|f| f.2).sum::<f64>() / kf;

    Ok(CVReport {
        beta,
        folds: folds.into_iter().map(|f| f.0).collect(),
        mean,
        mean_loss_curve,
        mean_seconds_per_epoch,
    })
}

/// Winner tally over a score table (rows: datasets, columns: candidates).
///
/// Each dataset awards one win to the column with the highest score; exact
/// ties go to the earliest column, so callers should list baselines first
/// to keep the convention conservative. Tallies always sum to the number
/// of rows. A NaN cell is treated as missing and rejected.
pub fn count_wins(scores: &[Vec<f64>]) -> Result<Vec<usize>> {
    let Some(first) = scores.first() else {
        return Err(Error::contract("score table has no rows"));
    };
    let cols = first.len();
    if cols == 0 {
        return Err(Error::contract("score table has no columns"));
    }
    let mut tally = vec![0usize; cols];
    for (row_idx, row) in scores.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::LengthMismatch {
                left: row.len(),
                right: cols,
            });
        }
        let mut best = 0usize;
        for (col, &v) in row.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::contract(format!(
                    "missing score at row {row_idx}, column {col}"
                )));
            }
            if v > row[best] {
                best = col;
            }
        }
        tally[best] += 1;
    }
    Ok(tally)
}

/// Fraction of the total loss reduction attained by `epoch`:
/// `(initial - current) / (initial - final)`. The final epoch is always
/// 1.0; a flat curve has no defined rate.
pub fn achievement_rate(curve: &[f64], epoch: usize) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::contract("curve needs at least two epochs"));
    }
    if epoch >= curve.len() {
        return Err(Error::contract(format!(
            "epoch {epoch} out of range for a {}-epoch curve",
            curve.len()
        )));
    }
    let initial = curve[0];
    let last = *curve.last().expect("non-empty");
    if initial == last {
        return Err(Error::domain(
            "achievement rate is undefined on a flat curve (initial == final)",
        ));
    }
    Ok((initial - curve[epoch]) / (initial - last))
}

/// One row of a scale sweep: the targeted metric's mean validation score
/// at each amplifying scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub metric: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTable {
    pub scales: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// Cross-validates every `(metric, scale)` pair and reports the targeted
/// metric's mean score in a scale-by-metric grid.
pub fn scale_sweep(
    d: &Dataset,
    kinds: &[MetricKind],
    scales: &[f64],
    nc: &NetworkConfig,
    tc: &TrainConfig,
    k: usize,
) -> Result<SweepTable> {
    if scales.is_empty() || kinds.is_empty() {
        return Err(Error::contract("sweep needs at least one metric and one scale"));
    }
    let cells: Vec<Vec<f64>> = kinds
        .par_iter()
        .enumerate()
        .map(|(ki, &kind)| -> Result<Vec<f64>> {
            scales
                .par_iter()
                .enumerate()
                .map(|(si, &l)| -> Result<f64> {
                    let scale = crate::approx::AmplifyingScale::new(l)?;
                    let cell = (ki * scales.len() + si) as u64;
                    let cell_tc = TrainConfig {
                        loss: LossSpec::any(kind).with_scale(scale),
                        seed: derive_seed(tc.seed, 1000 + cell),
                        ..*tc
                    };
                    let report = cross_validate(d, nc, &cell_tc, k)?;
                    Ok(report.mean.get(kind))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepTable {
        scales: scales.to_vec(),
        rows: kinds
            .iter()
            .zip(cells)
            .map(|(kind, scores)| SweepRow {
                metric: kind.label(),
                scores,
            })
            .collect(),
    })
}

/// One timed training run, for learning-speed comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimedRun {
    pub id: String,
    pub epochs: usize,
    pub batch_fraction: f64,
    pub seconds_per_epoch: f64,
}

/// Per-run wall-time ratios against a named baseline (the baseline's own
/// ratio is exactly 1). All runs must share epochs and batch settings.
pub fn timing_ratio(runs: &[TimedRun], baseline: &str) -> Result<Vec<(String, f64)>> {
    let base = runs
        .iter()
        .find(|r| r.id == baseline)
        .ok_or_else(|| Error::contract(format!("baseline '{baseline}' not among the runs")))?;
    for r in runs {
        if r.epochs != base.epochs || r.batch_fraction != base.batch_fraction {
            return Err(Error::contract(format!(
                "run '{}' was timed under different settings than '{baseline}'",
                r.id
            )));
        }
    }
    Ok(runs
        .iter()
        .map(|r| {
            let ratio = if r.id == baseline {
                1.0
            } else {
                r.seconds_per_epoch / base.seconds_per_epoch
            };
            (r.id.clone(), ratio)
        })
        .collect())
}
