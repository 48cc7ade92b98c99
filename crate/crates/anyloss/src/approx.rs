//! The amplifying approximation function and its validity analysis.
//!
//! A class probability `p` in `[0, 1]` is pushed toward 0 or 1 by
//!
//! ```text
//! A(p) = 1 / (1 + exp(-L * (p - 0.5)))
//! ```
//!
//! where `L` is a positive *amplifying scale*. The amplified value behaves
//! like a predicted label while staying differentiable, which is what lets a
//! confusion matrix be assembled in a differentiable form.
//!
//! Two conditions bound the usable `L`:
//!
//! 1. **Amplifier**: `|A(p) - 0.5| >= |p - 0.5|` — the function must push
//!    probabilities outward, never inward. This fails for small `L`.
//! 2. **No 0/1**: `0 < A(p) < 1` *as evaluated in f64*. For large `L` the
//!    exponential underflows past the unit roundoff and `A(p)` rounds to an
//!    exact 0 or 1, zeroing the factor `L * A * (1 - A)` in every gradient
//!    and permanently stalling training.
//!
//! [`valid_scale_range`] gives the closed-form `[min, max]` window for a
//! requested accuracy level `t` (the distance of the most extreme test
//! probabilities from 0 and 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit roundoff of f64: the largest `x` with `fl(1 + x) == 1` under
/// round-to-nearest. `A(p)` saturates to exact 1.0 once the exponential
/// term drops to this size.
pub const UNIT_ROUNDOFF: f64 = 1.110_223_024_625_156_5e-16; // 2^-53

/// Positive amplifying scale `L` of the approximation function.
///
/// The shipped default is 73, the largest integer inside the valid range
/// for accuracy level `1e-15` (about `[69.08, 73.47]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmplifyingScale(f64);

impl AmplifyingScale {
    /// Default scale used throughout the crate.
    pub const DEFAULT: AmplifyingScale = AmplifyingScale(73.0);

    pub fn new(l: f64) -> Result<Self> {
        if !l.is_finite() || l <= 0.0 {
            return Err(Error::domain(format!(
                "amplifying scale must be a positive finite real, got {l}"
            )));
        }
        Ok(AmplifyingScale(l))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for AmplifyingScale {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<f64> for AmplifyingScale {
    type Error = Error;

    fn try_from(l: f64) -> Result<Self> {
        AmplifyingScale::new(l)
    }
}

/// Accuracy level `t` in `(0, 0.5)`: the most extreme probabilities the
/// amplifier must handle are `t` and `1 - t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccuracyLevel(f64);

impl AccuracyLevel {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 || t >= 0.5 {
            return Err(Error::domain(format!(
                "accuracy level must lie strictly inside (0, 0.5), got {t}"
            )));
        }
        Ok(AccuracyLevel(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Valid window of amplifying scales for one accuracy level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRange {
    pub min: f64,
    pub max: f64,
    /// Set when `min > max`: no scale satisfies both conditions.
    pub empty: bool,
}

/// Logistic sigmoid, clamped to `[2^-53, 1 - 2^-53]` so that downstream
/// logs and gradient divisions stay finite.
pub fn sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("sigmoid input must be finite, got {z}")));
    }
    // Evaluate the branch that keeps the exponential argument negative.
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    Ok(p.clamp(UNIT_ROUNDOFF, 1.0 - UNIT_ROUNDOFF))
}

fn amplify_raw(p: f64, l: f64) -> f64 {
    // Deliberately *not* clamped: saturation to an exact 0.0 or 1.0 is real
    // behaviour this crate must expose (it is what invalidates large L).
    // One exponential of a non-positive argument keeps A(1-p) = 1 - A(p)
    // to within a rounding on each side.
    let d = p - 0.5;
    let e = (-l * d.abs()).exp();
    if d >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// The approximation function `A(p) = 1 / (1 + exp(-L (p - 0.5)))`.
///
/// The output is whatever f64 arithmetic produces, including an exact 0.0
/// or 1.0 when `L` is large enough to saturate.
pub fn approximate(p: f64, scale: AmplifyingScale) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!(
            "probability must lie in [0, 1], got {p}"
        )));
    }
    Ok(amplify_raw(p, scale.value()))
}

/// Derivative of the approximation function expressed through its own
/// output: `dA/dp = L * A * (1 - A)`.
///
/// Returns exactly 0.0 for a saturated `yh` of 0.0 or 1.0 — the
/// "no more update" stall callers are expected to surface.
pub fn approximate_derivative(yh: f64, scale: AmplifyingScale) -> f64 {
    scale.value() * yh * (1.0 - yh)
}

/// First validity condition: does `A` amplify at `p`, i.e. push the value
/// at least as far from 0.5 as the input?
pub fn check_amplifier(p: f64, scale: AmplifyingScale) -> bool {
    let a = amplify_raw(p, scale.value());
    (a - 0.5).abs() >= (p - 0.5).abs()
}

/// Second validity condition: `A(p)` stays strictly inside `(0, 1)` when
/// evaluated in f64.
pub fn check_no_saturation(p: f64, scale: AmplifyingScale) -> bool {
    let a = amplify_raw(p, scale.value());
    a > 0.0 && a < 1.0
}

/// Smallest scale whose amplifier condition holds on all of `[t, 1 - t]`.
///
/// Solving `A(t) = t` at the boundary gives `ln((1 - t) / t) / (0.5 - t)`;
/// by symmetry the same bound covers `p = 1 - t`.
pub fn min_valid_scale(level: AccuracyLevel) -> f64 {
    let t = level.value();
    ((1.0 - t) / t).ln() / (0.5 - t)
}

/// Largest scale for which `A(1 - t)` still rounds strictly below 1.0 in
/// f64. Saturation happens once `exp(-L (0.5 - t))` falls to the unit
/// roundoff `2^-53`, so the bound is `53 ln 2 / (0.5 - t)`.
pub fn max_valid_scale(level: AccuracyLevel) -> f64 {
    let t = level.value();
    53.0 * std::f64::consts::LN_2 / (0.5 - t)
}

/// Valid `[min, max]` scale window for one accuracy level; `empty` when the
/// amplifier bound already exceeds the saturation bound.
pub fn valid_scale_range(level: AccuracyLevel) -> ScaleRange {
    let min = min_valid_scale(level);
    let max = max_valid_scale(level);
    ScaleRange {
        min,
        max,
        empty: min > max,
    }
}
