//! Dataset ingestion, synthetic generation, and train-time preprocessing.

mod kfold;
mod resample;

pub use kfold::{stratified_kfold, FoldPlan};
pub use resample::{random_undersample, smote};

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A binary-classification dataset: an `n x m` feature matrix and 0/1
/// labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<u8>, name: impl Into<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: y.len(),
            });
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::contract("dataset needs at least one row and one feature"));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::contract(format!("labels must be 0 or 1, got {bad}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("features must be finite"));
        }
        Ok(Dataset {
            x,
            y,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v == 1).count();
        (self.y.len() - pos, pos)
    }

    /// Majority-to-minority ratio; infinite when a class is empty.
    pub fn imbalance_ratio(&self) -> f64 {
        let (neg, pos) = self.class_counts();
        let (maj, min) = (neg.max(pos) as f64, neg.min(pos) as f64);
        maj / min
    }

    /// Row subset in the given index order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            name: name.into(),
        }
    }
}

/// CSV ingestion options.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Explicit label-string mappings, e.g. `("yes", 1)`. Unmapped labels
    /// must parse as 0 or 1.
    pub label_map: Vec<(String, u8)>,
    /// Drop rows containing unparseable or non-finite feature cells
    /// instead of failing. The number of dropped rows is reported back.
    pub drop_missing: bool,
}

/// How many rows were dropped during ingestion.
#[derive(Debug, Clone, Copy, Default)]
pub struct CsvSummary {
    pub dropped_rows: usize,
}

/// Loads a UTF-8, comma-separated file with a header row; the last column
/// is the label, everything before it a float feature.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<(Dataset, CsvSummary)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Csv {
            row: 0,
            col: 0,
            msg: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            col: 0,
            msg: e.to_string(),
        })?
        .clone();
    if headers.len() < 2 {
        return Err(Error::contract(
            "csv needs at least one feature column and a label column",
        ));
    }
    let m = headers.len() - 1;

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut dropped = 0usize;

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            row: row_idx + 2,
            col: 0,
            msg: e.to_string(),
        })?;
        let mut features = Vec::with_capacity(m);
        let mut missing = false;
        for col in 0..m {
            let cell = record.get(col).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ if opts.drop_missing => {
                    missing = true;
                    break;
                }
                _ => {
                    return Err(Error::Csv {
                        row: row_idx + 2,
                        col: col + 1,
                        msg: format!("cannot parse feature cell '{cell}'"),
                    })
                }
            }
        }
        if missing {
            dropped += 1;
            continue;
        }
        let raw_label = record.get(m).unwrap_or("").trim();
        let label = match opts.label_map.iter().find(|(k, _)| k == raw_label) {
            Some((_, v)) => *v,
            None => match raw_label.parse::<u8>() {
                Ok(v @ (0 | 1)) => v,
                _ => {
                    return Err(Error::Csv {
                        row: row_idx + 2,
                        col: m + 1,
                        msg: format!("label '{raw_label}' is not 0/1 and has no mapping"),
                    })
                }
            },
        };
        rows.extend_from_slice(&features);
        labels.push(label);
    }

    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} row(s) with missing or non-numeric features",
            path.display()
        );
    }
    let n = labels.len();
    let x = Array2::from_shape_vec((n, m), rows).expect("shape matches element count");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok((Dataset::new(x, labels, name)?, CsvSummary { dropped_rows: dropped }))
}

/// Generates a two-Gaussian-cluster dataset with exactly
/// `round(n * pos_fraction)` positive samples.
///
/// The cluster means sit `class_separation` apart along a random unit
/// direction; both clusters have unit covariance. Rows are shuffled so the
/// classes are interleaved.
pub fn synth_imbalanced(
    n: usize,
    m: usize,
    pos_fraction: f64,
    class_separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || m == 0 {
        return Err(Error::contract("need n >= 1 and m >= 1"));
    }
    if !(pos_fraction > 0.0 && pos_fraction < 1.0) {
        return Err(Error::contract(format!(
            "positive fraction must lie in (0, 1), got {pos_fraction}"
        )));
    }
    if !(class_separation.is_finite() && class_separation >= 0.0) {
        return Err(Error::contract("class separation must be non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Random unit direction for the separation axis.
    let mut direction: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    direction.iter_mut().for_each(|v| *v /= norm);

    let n_pos = ((n as f64) * pos_fraction).round() as usize;
    let n_pos = n_pos.clamp(1, n - 1);
    let half = class_separation / 2.0;

    let mut x = Array2::zeros((n, m));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i < n_pos;
        let sign = if positive { 1.0 } else { -1.0 };
        for j in 0..m {
            let noise: f64 = rng.sample(StandardNormal);
            x[[i, j]] = sign * half * direction[j] + noise;
        }
        y.push(u8::from(positive));
    }

    // Interleave the classes.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let x = x.select(Axis(0), &order);
    let y: Vec<u8> = order.iter().map(|&i| y[i]).collect();
    Dataset::new(x, y, format!("synth_{n}x{m}_p{pos_fraction}"))
}

/// Per-feature zero-mean/unit-variance scaling fitted on training data
/// only. Constant features pass through unscaled.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n).collect();
        let std: Vec<f64> = x
            .columns()
            .into_iter()
            .zip(&mean)
            .map(|(c, &mu)| {
                let var = c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_simple_csv() {
        let f = write_csv("a,b,label\n1.0,2.0,0\n3.0,4.0,1\n-1.5,0.25,1\n");
        let (d, summary) = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.m(), 2);
        assert_eq!(d.y, vec![0, 1, 1]);
        assert_eq!(d.x[[2, 0]], -1.5);
        assert_eq!(summary.dropped_rows, 0);
    }

    #[test]
    fn rejects_unmapped_label() {
        let f = write_csv("a,label\n1.0,2\n");
        let err = load_csv(f.path(), &CsvOptions::default());
        assert!(matches!(err, Err(Error::Csv { row: 2, .. })));
    }

    #[test]
    fn maps_labels_through_options() {
        let f = write_csv("a,label\n1.0,yes\n2.0,no\n");
        let opts = CsvOptions {
            label_map: vec![("yes".into(), 1), ("no".into(), 0)],
            ..CsvOptions::default()
        };
        let (d, _) = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.y, vec![1, 0]);
    }

    #[test]
    fn drops_rows_with_missing_cells() {
        let f = write_csv("a,b,label\n1.0,2.0,0\n,4.0,1\n5.0,6.0,1\n");
        let opts = CsvOptions {
            drop_missing: true,
            ..CsvOptions::default()
        };
        let (d, summary) = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(summary.dropped_rows, 1);
    }

    #[test]
    fn unparseable_cell_is_an_error_without_drop_policy() {
        let f = write_csv("a,b,label\n1.0,oops,0\n");
        let err = load_csv(f.path(), &CsvOptions::default());
        match err {
            Err(Error::Csv { row, col, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(col, 2);
            }
            other => panic!("expected csv error, got {other:?}"),
        }
    }

    #[test]
    fn synth_hits_exact_positive_count() {
        let d = synth_imbalanced(10_000, 2, 0.1, 2.0, 42).unwrap();
        let (_, pos) = d.class_counts();
        assert_eq!(pos, 1000);
        assert_eq!(d.n(), 10_000);
        assert_eq!(d.m(), 2);
        assert!((d.imbalance_ratio() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let a = synth_imbalanced(500, 3, 0.25, 1.5, 7).unwrap();
        let b = synth_imbalanced(500, 3, 0.25, 1.5, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_imbalanced(500, 3, 0.25, 1.5, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_rejects_bad_fraction() {
        assert!(synth_imbalanced(100, 2, 0.0, 1.0, 1).is_err());
        assert!(synth_imbalanced(100, 2, 1.0, 1.0, 1).is_err());
    }

    /// With zero separation the classes are identically distributed: the
    /// Bayes rule is the majority vote, so a prior-aware classifier lands
    /// at the majority rate.
    #[test]
    fn zero_separation_is_unlearnable() {
        use crate::loss::LossSpec;
        use crate::network::{train, Network, NetworkConfig, TrainConfig};

        let d = synth_imbalanced(4000, 2, 0.3, 0.0, 3).unwrap();
        let net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
        let tc = TrainConfig {
            epochs: 500,
            learning_rate: 0.1,
            ..TrainConfig::slp(LossSpec::bce(), 7)
        };
        let report = train(net, d.x.view(), &d.y, &tc).unwrap();
        let (_, predicted) = report.network.predict(d.x.view()).unwrap();
        let correct = predicted.iter().zip(&d.y).filter(|(a, b)| a == b).count();
        let acc = correct as f64 / d.n() as f64;
        let majority = 0.7;
        assert!(
            (acc - majority).abs() < 0.03,
            "accuracy {acc} should sit at the majority rate {majority}"
        );
    }

    #[test]
    fn standardizer_zeroes_mean_and_scales_variance() {
        let d = synth_imbalanced(300, 4, 0.5, 3.0, 17).unwrap();
        let s = Standardizer::fit(&d.x);
        let t = s.transform(&d.x);
        for j in 0..4 {
            let col = t.column(j);
            let mean = col.sum() / 300.0;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 300.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn standardizer_leaves_constant_features_finite() {
        let x = ndarray::array![[1.0, 5.0], [1.0, 6.0], [1.0, 7.0]];
        let s = Standardizer::fit(&x);
        let t = s.transform(&x);
        assert!(t.iter().all(|v| v.is_finite()));
        assert_eq!(t[[0, 0]], 0.0);
    }
}
