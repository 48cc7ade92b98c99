//! Soft and hard confusion matrices and the metric formulas on top of them.
//!
//! The *soft* confusion matrix replaces thresholded labels with amplified
//! probabilities, so each cell is a real number and every metric built from
//! the cells is differentiable:
//!
//! ```text
//! TN = Σ (1 - y)(1 - yh)    FN = Σ y (1 - yh)
//! FP = Σ (1 - y) yh         TP = Σ y yh
//! ```
//!
//! The *hard* matrix is the ordinary integer-count version used for
//! evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target metric of a confusion-matrix loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Accuracy,
    /// F-beta score; `beta` weights recall against precision and must be
    /// positive.
    FBeta(f64),
    GMean,
    BalancedAccuracy,
}

impl MetricKind {
    /// F-1: the harmonic mean of precision and recall.
    pub fn f1() -> Self {
        MetricKind::FBeta(1.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let MetricKind::FBeta(beta) = self {
            if !beta.is_finite() || *beta <= 0.0 {
                return Err(Error::domain(format!("beta must be positive, got {beta}")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            MetricKind::Accuracy => "accuracy".to_string(),
            MetricKind::FBeta(beta) => format!("f{beta}"),
            MetricKind::GMean => "gmean".to_string(),
            MetricKind::BalancedAccuracy => "balanced_accuracy".to_string(),
        }
    }
}

/// Metric value plus a degeneracy flag.
///
/// A metric whose denominator vanishes (no positives in the fold, say)
/// scores 0 by convention instead of aborting, and the flag records that
/// the value is an artifact of the convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

/// Real-valued confusion cells computed from amplified probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftConfusion {
    pub true_neg: f64,
    pub false_neg: f64,
    pub false_pos: f64,
    pub true_pos: f64,
}

impl SoftConfusion {
    pub fn total(&self) -> f64 {
        self.true_neg + self.false_neg + self.false_pos + self.true_pos
    }

    /// Metric score from the four cells; see [`Score`] for the degenerate
    /// convention.
    pub fn score(&self, kind: MetricKind) -> Result<Score> {
        kind.validate()?;
        let (tn, fn_sum, fp, tp) = (self.true_neg, self.false_neg, self.false_pos, self.true_pos);
        let ok = |value: f64| Score {
            value,
            degenerate: false,
        };
        let degenerate = Score {
            value: 0.0,
            degenerate: true,
        };
        let score = match kind {
            MetricKind::Accuracy => {
                let n = self.total();
                if n == 0.0 {
                    degenerate
                } else {
                    ok((tp + tn) / n)
                }
            }
            MetricKind::FBeta(beta) => {
                let b2 = beta * beta;
                let denom = (1.0 + b2) * tp + fp + b2 * fn_sum;
                if denom == 0.0 {
                    degenerate
                } else {
                    ok((1.0 + b2) * tp / denom)
                }
            }
            MetricKind::GMean => {
                let pos = tp + fn_sum;
                let neg = tn + fp;
                if pos == 0.0 || neg == 0.0 {
                    degenerate
                } else {
                    ok((tp / pos * (tn / neg)).sqrt())
                }
            }
            MetricKind::BalancedAccuracy => {
                let pos = tp + fn_sum;
                let neg = tn + fp;
                if pos == 0.0 || neg == 0.0 {
                    degenerate
                } else {
                    ok(0.5 * (tp / pos + tn / neg))
                }
            }
        };
        Ok(score)
    }
}

/// Integer-count confusion matrix from thresholded labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardConfusion {
    pub true_neg: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_pos: usize,
}

impl HardConfusion {
    pub fn total(&self) -> usize {
        self.true_neg + self.false_neg + self.false_pos + self.true_pos
    }

    pub fn to_soft(&self) -> SoftConfusion {
        SoftConfusion {
            true_neg: self.true_neg as f64,
            false_neg: self.false_neg as f64,
            false_pos: self.false_pos as f64,
            true_pos: self.true_pos as f64,
        }
    }

    pub fn score(&self, kind: MetricKind) -> Result<Score> {
        self.to_soft().score(kind)
    }
}

/// Thresholds probabilities into labels; `p >= 0.5` maps to 1 (the tie at
/// exactly 0.5 counts as positive).
pub fn threshold_labels(probs: &[f64]) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::contract(format!("labels must be 0 or 1, got {bad}")));
    }
    Ok(())
}

/// Soft confusion matrix of ground-truth labels against amplified
/// probabilities.
pub fn soft_confusion(labels: &[u8], amplified: &[f64]) -> Result<SoftConfusion> {
    if labels.len() != amplified.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: amplified.len(),
        });
    }
    check_labels(labels)?;
    let mut cells = SoftConfusion {
        true_neg: 0.0,
        false_neg: 0.0,
        false_pos: 0.0,
        true_pos: 0.0,
    };
    for (&y, &yh) in labels.iter().zip(amplified) {
        let y = f64::from(y);
        cells.true_neg += (1.0 - y) * (1.0 - yh);
        cells.false_neg += y * (1.0 - yh);
        cells.false_pos += (1.0 - y) * yh;
        cells.true_pos += y * yh;
    }
    Ok(cells)
}

/// Integer confusion matrix of ground-truth labels against predictions.
pub fn hard_confusion(labels: &[u8], predicted: &[u8]) -> Result<HardConfusion> {
    if labels.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: predicted.len(),
        });
    }
    check_labels(labels)?;
    check_labels(predicted)?;
    let mut cells = HardConfusion {
        true_neg: 0,
        false_neg: 0,
        false_pos: 0,
        true_pos: 0,
    };
    for (&y, &yhat) in labels.iter().zip(predicted) {
        match (y, yhat) {
            (0, 0) => cells.true_neg += 1,
            (1, 0) => cells.false_neg += 1,
            (0, 1) => cells.false_pos += 1,
            _ => cells.true_pos += 1,
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::{approximate, AmplifyingScale};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn threshold_basics() {
        assert_eq!(threshold_labels(&[0.9, 0.2]), vec![1, 0]);
        assert_eq!(threshold_labels(&[0.5]), vec![1]);
        assert_eq!(threshold_labels(&[0.49999, 0.50001]), vec![0, 1]);
    }

    #[test]
    fn soft_confusion_examples() {
        let c = soft_confusion(&[1, 0], &[0.9, 0.2]).unwrap();
        assert!((c.true_neg - 0.8).abs() < 1e-15);
        assert!((c.false_neg - 0.1).abs() < 1e-15);
        assert!((c.false_pos - 0.2).abs() < 1e-15);
        assert!((c.true_pos - 0.9).abs() < 1e-15);

        let c = soft_confusion(&[1], &[0.5]).unwrap();
        assert_eq!(
            (c.true_neg, c.false_neg, c.false_pos, c.true_pos),
            (0.0, 0.5, 0.0, 0.5)
        );

        let c = soft_confusion(&[0, 0], &[0.001, 0.001]).unwrap();
        assert!((c.true_neg - 1.998).abs() < 1e-12);
        assert!((c.false_pos - 0.002).abs() < 1e-12);
        assert_eq!(c.false_neg, 0.0);
        assert_eq!(c.true_pos, 0.0);
    }

    #[test]
    fn soft_confusion_length_mismatch() {
        assert!(matches!(
            soft_confusion(&[1, 0], &[0.5]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
    }

    #[test]
    fn hard_confusion_examples() {
        let c = hard_confusion(&[1, 0, 1], &[1, 1, 0]).unwrap();
        assert_eq!(
            (c.true_neg, c.false_neg, c.false_pos, c.true_pos),
            (0, 1, 1, 1)
        );
        let c = hard_confusion(&[1, 0], &[1, 0]).unwrap();
        assert_eq!(
            (c.true_neg, c.false_neg, c.false_pos, c.true_pos),
            (1, 0, 0, 1)
        );
        let c = hard_confusion(&[0], &[1]).unwrap();
        assert_eq!(
            (c.true_neg, c.false_neg, c.false_pos, c.true_pos),
            (0, 0, 1, 0)
        );
    }

    #[test]
    fn metric_scores_on_reference_cells() {
        let c = SoftConfusion {
            true_neg: 0.8,
            false_neg: 0.1,
            false_pos: 0.2,
            true_pos: 0.9,
        };
        assert!((c.score(MetricKind::Accuracy).unwrap().value - 0.85).abs() < 1e-12);
        assert!((c.score(MetricKind::f1()).unwrap().value - 0.857143).abs() < 1e-6);
        assert!((c.score(MetricKind::GMean).unwrap().value - 0.848528).abs() < 1e-6);
        assert!((c.score(MetricKind::BalancedAccuracy).unwrap().value - 0.85).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominators_score_zero_with_flag() {
        let c = SoftConfusion {
            true_neg: 3.0,
            false_neg: 0.0,
            false_pos: 0.0,
            true_pos: 0.0,
        };
        let s = c.score(MetricKind::f1()).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.degenerate);
        let s = c.score(MetricKind::GMean).unwrap();
        assert!(s.degenerate);
        let s = c.score(MetricKind::BalancedAccuracy).unwrap();
        assert!(s.degenerate);
        // Accuracy is well defined here.
        let s = c.score(MetricKind::Accuracy).unwrap();
        assert!(!s.degenerate);
        assert_eq!(s.value, 1.0);
    }

    #[test]
    fn invalid_beta_rejected() {
        let c = HardConfusion {
            true_neg: 1,
            false_neg: 1,
            false_pos: 1,
            true_pos: 1,
        };
        assert!(c.score(MetricKind::FBeta(0.0)).is_err());
        assert!(c.score(MetricKind::FBeta(-2.0)).is_err());
    }

    #[test]
    fn hard_scores_match_textbook_counts() {
        let c = HardConfusion {
            true_neg: 50,
            false_neg: 5,
            false_pos: 10,
            true_pos: 35,
        };
        assert_eq!(c.score(MetricKind::Accuracy).unwrap().value, 85.0 / 100.0);
        let precision = 35.0 / 45.0;
        let recall = 35.0 / 40.0;
        let f1 = 2.0 * precision * recall / (precision + recall);
        assert!((c.score(MetricKind::f1()).unwrap().value - f1).abs() < 1e-12);
        let sens: f64 = 35.0 / 40.0;
        let spec: f64 = 50.0 / 60.0;
        assert!((c.score(MetricKind::GMean).unwrap().value - (sens * spec).sqrt()).abs() < 1e-12);
        assert!(
            (c.score(MetricKind::BalancedAccuracy).unwrap().value - 0.5 * (sens + spec)).abs()
                < 1e-12
        );
    }

    /// With every probability at least 0.1 away from the threshold and the
    /// default scale, each soft cell sits within n/(1 + e^7.3) of the hard
    /// cell.
    #[test]
    fn soft_cells_track_hard_cells_when_probs_are_decided() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bound_per_sample = 1.0 / (1.0 + 7.3f64.exp());
        for _ in 0..200 {
            let n = rng.gen_range(1..200);
            let probs: Vec<f64> = (0..n)
                .map(|_| {
                    let p: f64 = rng.gen_range(0.0..0.8);
                    if p < 0.4 {
                        p
                    } else {
                        p + 0.2
                    }
                })
                .collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1) as u8).collect();
            let amplified: Vec<f64> = probs
                .iter()
                .map(|&p| approximate(p, AmplifyingScale::DEFAULT).unwrap())
                .collect();
            let soft = soft_confusion(&labels, &amplified).unwrap();
            let hard = hard_confusion(&labels, &threshold_labels(&probs)).unwrap();
            let bound = n as f64 * bound_per_sample;
            assert!((soft.true_neg - hard.true_neg as f64).abs() <= bound);
            assert!((soft.false_neg - hard.false_neg as f64).abs() <= bound);
            assert!((soft.false_pos - hard.false_pos as f64).abs() <= bound);
            assert!((soft.true_pos - hard.true_pos as f64).abs() <= bound);
        }
    }

    proptest! {
        #[test]
        fn soft_cells_partition_the_batch(
            rows in prop::collection::vec((0u8..=1, 0.0f64..=1.0), 1..100)
        ) {
            let labels: Vec<u8> = rows.iter().map(|r| r.0).collect();
            let amplified: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let c = soft_confusion(&labels, &amplified).unwrap();
            let n = labels.len() as f64;
            prop_assert!((c.total() - n).abs() <= n * 1e-12);
            prop_assert!(c.true_neg >= 0.0 && c.false_neg >= 0.0);
            prop_assert!(c.false_pos >= 0.0 && c.true_pos >= 0.0);
        }

        #[test]
        fn f1_is_harmonic_mean_of_precision_recall(
            tn in 0.0f64..50.0, fn_cell in 0.1f64..50.0,
            fp in 0.1f64..50.0, tp in 0.1f64..50.0
        ) {
            let c = SoftConfusion { true_neg: tn, false_neg: fn_cell, false_pos: fp, true_pos: tp };
            let precision = tp / (tp + fp);
            let recall = tp / (tp + fn_cell);
            let harmonic = 2.0 * precision * recall / (precision + recall);
            let f1 = c.score(MetricKind::f1()).unwrap().value;
            prop_assert!((f1 - harmonic).abs() < 1e-10);
        }

        #[test]
        fn scores_stay_in_unit_interval(
            tn in 0.0f64..100.0, fn_cell in 0.0f64..100.0,
            fp in 0.0f64..100.0, tp in 0.0f64..100.0
        ) {
            let c = SoftConfusion { true_neg: tn, false_neg: fn_cell, false_pos: fp, true_pos: tp };
            for kind in [MetricKind::Accuracy, MetricKind::f1(), MetricKind::FBeta(2.0),
                         MetricKind::GMean, MetricKind::BalancedAccuracy] {
                let s = c.score(kind).unwrap();
                prop_assert!((0.0..=1.0).contains(&s.value), "{kind:?} gave {}", s.value);
            }
        }
    }
}
