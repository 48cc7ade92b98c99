//! Loss values and analytic gradients.
//!
//! An AnyLoss is `1 - f(TN, FN, FP, TP)` evaluated on the soft confusion
//! matrix, so minimizing the loss directly maximizes the chosen metric. The
//! gradients with respect to the amplified probabilities are batch-coupled
//! for every metric except accuracy: each component depends on the whole
//! batch through the confusion sums, which is what makes these losses
//! non-decomposable.
//!
//! MSE and BCE are included as the standard decomposable baselines; they are
//! defined on the raw class probabilities, before amplification.

use serde::{Deserialize, Serialize};

use crate::approx::{AmplifyingScale, UNIT_ROUNDOFF};
use crate::confusion::{soft_confusion, MetricKind};
use crate::error::{Error, Result};

/// Clamp bound applied to amplified probabilities before gradient
/// divisions; guards the G-mean square root and the F-beta denominator.
const GRAD_CLAMP: f64 = 1e-12;

/// Which loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1 - metric` on the soft confusion matrix.
    AnyLoss(MetricKind),
    Mse,
    Bce,
}

/// A loss selection plus the amplifying scale used to produce the
/// amplified probabilities it consumes. The scale is ignored by the MSE
/// and BCE baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub scale: AmplifyingScale,
}

impl LossSpec {
    pub fn any(metric: MetricKind) -> Self {
        LossSpec {
            kind: LossKind::AnyLoss(metric),
            scale: AmplifyingScale::DEFAULT,
        }
    }

    pub fn mse() -> Self {
        LossSpec {
            kind: LossKind::Mse,
            scale: AmplifyingScale::DEFAULT,
        }
    }

    pub fn bce() -> Self {
        LossSpec {
            kind: LossKind::Bce,
            scale: AmplifyingScale::DEFAULT,
        }
    }

    /// Overrides the amplifying scale, e.g. for scale sweeps.
    pub fn with_scale(mut self, scale: AmplifyingScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn is_any_loss(&self) -> bool {
        matches!(self.kind, LossKind::AnyLoss(_))
    }

    /// True for losses whose gradients divide by the per-class counts of
    /// the batch (G-mean and balanced accuracy), which therefore need both
    /// classes present in every batch.
    pub fn needs_both_classes(&self) -> bool {
        matches!(
            self.kind,
            LossKind::AnyLoss(MetricKind::GMean) | LossKind::AnyLoss(MetricKind::BalancedAccuracy)
        )
    }

    /// Short display label, e.g. `L_F1`, `BCE`.
    pub fn label(&self) -> String {
        match self.kind {
            LossKind::Mse => "MSE".to_string(),
            LossKind::Bce => "BCE".to_string(),
            LossKind::AnyLoss(MetricKind::Accuracy) => "L_A".to_string(),
            LossKind::AnyLoss(MetricKind::FBeta(beta)) => format!("L_F{beta}"),
            LossKind::AnyLoss(MetricKind::GMean) => "L_G".to_string(),
            LossKind::AnyLoss(MetricKind::BalancedAccuracy) => "L_B".to_string(),
        }
    }
}

/// Loss value plus its gradient with respect to the vector it consumes:
/// amplified probabilities for AnyLoss, raw probabilities for MSE/BCE.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

fn check_nonempty(labels: &[u8], values: &[f64]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::contract("loss evaluation needs a non-empty batch"));
    }
    if labels.len() != values.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: values.len(),
        });
    }
    Ok(())
}

/// Loss value for any spec. AnyLoss variants consume amplified
/// probabilities; MSE and BCE consume raw class probabilities.
pub fn loss_value(spec: &LossSpec, labels: &[u8], values: &[f64]) -> Result<f64> {
    check_nonempty(labels, values)?;
    let n = labels.len() as f64;
    match spec.kind {
        LossKind::AnyLoss(kind) => {
            let cells = soft_confusion(labels, values)?;
            // A degenerate metric scores 0 by convention, so the loss is 1.
            Ok(1.0 - cells.score(kind)?.value)
        }
        LossKind::Mse => {
            let sum: f64 = labels
                .iter()
                .zip(values)
                .map(|(&y, &p)| {
                    let d = f64::from(y) - p;
                    d * d
                })
                .sum();
            Ok(sum / n)
        }
        LossKind::Bce => {
            let sum: f64 = labels
                .iter()
                .zip(values)
                .map(|(&y, &p)| {
                    let p = p.clamp(UNIT_ROUNDOFF, 1.0 - UNIT_ROUNDOFF);
                    -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln())
                })
                .sum();
            Ok(sum / n)
        }
    }
}

/// Analytic gradient of an AnyLoss with respect to each amplified
/// probability.
///
/// Closed forms, with `Py = Σy`, `Ny = n - Py`, `TPs = Σ y·yh` and
/// `TNs = Σ (1-y)(1-yh)`:
///
/// * accuracy: `(1 - 2 y_i) / n`
/// * F-beta:   `-(1+β²) (y_i D - TPs) / D²` with `D = β² Py + Σ yh`
/// * G-mean:   `-(y_i TNs + (y_i - 1) TPs) / (2 √(TPs TNs Py Ny))`
/// * balanced accuracy: `(Py - n y_i) / (2 Py Ny)`
///
/// G-mean and balanced accuracy divide by the per-class counts and return
/// [`Error::DegenerateClass`] when the batch holds a single class.
pub fn loss_grad_yh(spec: &LossSpec, labels: &[u8], amplified: &[f64]) -> Result<LossGrad> {
    check_nonempty(labels, amplified)?;
    let LossKind::AnyLoss(kind) = spec.kind else {
        return Err(Error::contract(
            "loss_grad_yh applies to AnyLoss variants; use baseline_grad_p for MSE/BCE",
        ));
    };
    kind.validate()?;
    let value = loss_value(spec, labels, amplified)?;
    let n = labels.len() as f64;
    let pos = labels.iter().map(|&y| f64::from(y)).sum::<f64>();
    let neg = n - pos;

    let grad = match kind {
        MetricKind::Accuracy => labels
            .iter()
            .map(|&y| (1.0 - 2.0 * f64::from(y)) / n)
            .collect(),
        MetricKind::FBeta(beta) => {
            let b2 = beta * beta;
            let clamped: Vec<f64> = amplified
                .iter()
                .map(|&yh| yh.clamp(GRAD_CLAMP, 1.0 - GRAD_CLAMP))
                .collect();
            let sum_yh: f64 = clamped.iter().sum();
            let tp: f64 = labels
                .iter()
                .zip(&clamped)
                .map(|(&y, &yh)| f64::from(y) * yh)
                .sum();
            let denom = b2 * pos + sum_yh;
            labels
                .iter()
                .map(|&y| -(1.0 + b2) * (f64::from(y) * denom - tp) / (denom * denom))
                .collect()
        }
        MetricKind::GMean => {
            if pos == 0.0 || neg == 0.0 {
                return Err(Error::DegenerateClass(
                    "G-mean gradient needs both classes in the batch".into(),
                ));
            }
            let clamped: Vec<f64> = amplified
                .iter()
                .map(|&yh| yh.clamp(GRAD_CLAMP, 1.0 - GRAD_CLAMP))
                .collect();
            let tp: f64 = labels
                .iter()
                .zip(&clamped)
                .map(|(&y, &yh)| f64::from(y) * yh)
                .sum();
            let tn: f64 = labels
                .iter()
                .zip(&clamped)
                .map(|(&y, &yh)| (1.0 - f64::from(y)) * (1.0 - yh))
                .sum();
            let root = (tp * tn * pos * neg).sqrt();
            labels
                .iter()
                .map(|&y| {
                    let y = f64::from(y);
                    -(y * tn + (y - 1.0) * tp) / (2.0 * root)
                })
                .collect()
        }
        MetricKind::BalancedAccuracy => {
            if pos == 0.0 || neg == 0.0 {
                return Err(Error::DegenerateClass(
                    "balanced-accuracy gradient needs both classes in the batch".into(),
                ));
            }
            labels
                .iter()
                .map(|&y| (pos - n * f64::from(y)) / (2.0 * pos * neg))
                .collect()
        }
    };
    Ok(LossGrad { value, grad })
}

/// Gradient of the MSE / BCE baselines with respect to each raw
/// probability: `-2 (y_i - p_i) / n` and `(p_i - y_i) / (n p_i (1 - p_i))`.
pub fn baseline_grad_p(spec: &LossSpec, labels: &[u8], probs: &[f64]) -> Result<LossGrad> {
    check_nonempty(labels, probs)?;
    let n = labels.len() as f64;
    let value = loss_value(spec, labels, probs)?;
    let grad = match spec.kind {
        LossKind::Mse => labels
            .iter()
            .zip(probs)
            .map(|(&y, &p)| -2.0 * (f64::from(y) - p) / n)
            .collect(),
        LossKind::Bce => labels
            .iter()
            .zip(probs)
            .map(|(&y, &p)| {
                let p = p.clamp(UNIT_ROUNDOFF, 1.0 - UNIT_ROUNDOFF);
                (p - f64::from(y)) / (n * p * (1.0 - p))
            })
            .collect(),
        LossKind::AnyLoss(_) => {
            return Err(Error::contract(
                "baseline_grad_p applies to MSE/BCE; use loss_grad_yh for AnyLoss",
            ))
        }
    };
    Ok(LossGrad { value, grad })
}
