//! Differentiable confusion-matrix losses for binary classification.
//!
//! Confusion-matrix metrics (accuracy, F-beta, G-mean, balanced accuracy)
//! are built from thresholded labels and are not differentiable. This crate
//! makes them trainable by amplifying the class probabilities with a steep
//! sigmoid so that a *soft* confusion matrix — and hence `1 - metric` as a
//! loss — can be assembled from differentiable quantities.
//!
//! The pieces:
//!
//! * [`approx`] — the amplifying function `A(p) = 1/(1 + e^{-L(p-0.5)})`,
//!   its derivative, and the closed-form analysis of which scales `L` both
//!   amplify and avoid f64 saturation;
//! * [`confusion`] — soft and hard confusion matrices and the metric
//!   formulas;
//! * [`loss`] — AnyLoss values and analytic gradients, plus MSE/BCE
//!   baselines;
//! * [`network`] — single-layer and one-hidden-layer sigmoid networks with
//!   batch normalization, manual backpropagation, and an SGD training loop;
//! * [`data`] — CSV ingestion, a synthetic imbalanced generator, stratified
//!   k-fold plans, random under-sampling and SMOTE;
//! * [`eval`] — the cross-validation harness, winner counting, Bayesian
//!   sign test with rope, achievement rates, timing ratios, and the
//!   amplifying-scale sweep;
//! * [`gradcheck`] — finite-difference verification of every analytic
//!   gradient.

pub mod approx;
pub mod confusion;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod network;
pub mod rng;

pub use approx::{AccuracyLevel, AmplifyingScale, ScaleRange};
pub use confusion::{HardConfusion, MetricKind, Score, SoftConfusion};
pub use data::Dataset;
pub use error::{Error, Result};
pub use loss::{LossKind, LossSpec};
pub use network::{Architecture, Network, NetworkConfig, TrainConfig, TrainReport};
