//! Mini-batch gradient-descent training loop.

use std::time::Instant;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{baseline_grad_p, loss_grad_yh, LossSpec};
use crate::network::{ForwardMode, Network, OutputGrad};

/// Hyperparameters of one training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Mini-batch size as a fraction of the training set; 1.0 is full batch.
    pub batch_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Single-layer defaults: 1000 full-batch epochs.
    pub fn slp(loss: LossSpec, seed: u64) -> Self {
        TrainConfig {
            loss,
            epochs: 1000,
            learning_rate: 1e-2,
            batch_fraction: 1.0,
            seed,
        }
    }

    /// Multi-layer defaults: 100 epochs, batch fraction 0.05, raised to
    /// 0.5 for the class-ratio losses so batches keep both classes.
    pub fn mlp(loss: LossSpec, seed: u64) -> Self {
        TrainConfig {
            loss,
            epochs: 100,
            learning_rate: 5e-3,
            batch_fraction: if loss.needs_both_classes() { 0.5 } else { 0.05 },
            seed,
        }
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean batch loss per epoch; length equals the configured epochs.
    pub loss_curve: Vec<f64>,
    pub wall_time_per_epoch: f64,
    pub network: Network,
    pub epochs: usize,
    pub batch_fraction: f64,
    /// Set when plain shuffled batches would have dropped a class and the
    /// loop switched to stratified (or full-batch) batching.
    pub stratified_fallback: bool,
}

fn chunk_indices(indices: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    indices.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Spreads each class across `n_batches` so every batch sees both classes.
fn stratified_batches(
    pos: &[usize],
    neg: &[usize],
    n_batches: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut pos = pos.to_vec();
    let mut neg = neg.to_vec();
    pos.shuffle(rng);
    neg.shuffle(rng);
    let mut batches = vec![Vec::new(); n_batches];
    for (i, idx) in pos.iter().chain(neg.iter()).enumerate() {
        batches[i % n_batches].push(*idx);
    }
    batches
}

fn single_class(batch: &[usize], labels: &[u8]) -> bool {
    let first = labels[batch[0]];
    batch.iter().all(|&i| labels[i] == first)
}

/// Trains the network with plain stochastic gradient descent.
///
/// Each epoch shuffles the data, walks mini-batches of
/// `ceil(batch_fraction * n)` samples, computes the loss gradient against
/// that batch's soft confusion matrix (or per-sample terms for MSE/BCE),
/// and applies one descent step per batch. The recorded epoch loss is the
/// mean of the batch losses.
///
/// For G-mean and balanced accuracy every batch must contain both classes;
/// when a shuffled batch would not, the loop falls back to stratified
/// batching (or a single full batch if even that cannot cover every batch)
/// and emits a warning.
pub fn train(net: Network, x: ArrayView2<'_, f64>, labels: &[u8], tc: &TrainConfig) -> Result<TrainReport> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::contract("training needs a non-empty dataset"));
    }
    if x.nrows() != n {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: n,
        });
    }
    if tc.epochs == 0 {
        return Err(Error::contract("epochs must be at least 1"));
    }
    if !(tc.batch_fraction > 0.0 && tc.batch_fraction <= 1.0) {
        return Err(Error::contract(format!(
            "batch fraction must lie in (0, 1], got {}",
            tc.batch_fraction
        )));
    }
    if !(tc.learning_rate.is_finite() && tc.learning_rate > 0.0) {
        return Err(Error::contract("learning rate must be positive"));
    }

    let mut net = net;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let batch_size = ((tc.batch_fraction * n as f64).ceil() as usize).clamp(1, n);
    let n_batches = n.div_ceil(batch_size);
    let class_sensitive = tc.loss.needs_both_classes();
    let pos_idx: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let neg_idx: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    let min_class = pos_idx.len().min(neg_idx.len());

    let mut all_indices: Vec<usize> = (0..n).collect();
    let mut loss_curve = Vec::with_capacity(tc.epochs);
    let mut stratified_fallback = false;
    let started = Instant::now();

    for _epoch in 0..tc.epochs {
        all_indices.shuffle(&mut rng);
        let mut batches = chunk_indices(&all_indices, batch_size);
        if class_sensitive && batches.iter().any(|b| single_class(b, labels)) {
            // A class-ratio loss cannot take a gradient on a single-class
            // batch; re-deal the epoch stratified, or full-batch when the
            // minority is too small to reach every batch.
            if !stratified_fallback {
                log::warn!(
                    "{}: shuffled batches dropped a class; switching to stratified batches",
                    tc.loss.label()
                );
                stratified_fallback = true;
            }
            batches = if min_class >= n_batches && min_class > 0 {
                stratified_batches(&pos_idx, &neg_idx, n_batches, &mut rng)
            } else {
                vec![all_indices.clone()]
            };
        }

        let mut epoch_loss = 0.0;
        for batch in &batches {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let cache = net.forward(xb.view(), tc.loss.scale, ForwardMode::Train)?;
            net.update_running_stats(&cache);
            let (value, grads) = if tc.loss.is_any_loss() {
                let lg = loss_grad_yh(
                    &tc.loss,
                    &yb,
                    cache.amplified.as_slice().expect("contiguous"),
                )?;
                let g = net.backward(&cache, OutputGrad::WrtAmplified(&lg.grad), tc.loss.scale)?;
                (lg.value, g)
            } else {
                let lg =
                    baseline_grad_p(&tc.loss, &yb, cache.probs.as_slice().expect("contiguous"))?;
                let g = net.backward(&cache, OutputGrad::WrtProbs(&lg.grad), tc.loss.scale)?;
                (lg.value, g)
            };
            net.apply_gradients(&grads, tc.learning_rate);
            epoch_loss += value;
        }
        loss_curve.push(epoch_loss / batches.len() as f64);
    }

    let wall = started.elapsed().as_secs_f64();
    Ok(TrainReport {
        loss_curve,
        wall_time_per_epoch: wall / tc.epochs as f64,
        network: net,
        epochs: tc.epochs,
        batch_fraction: tc.batch_fraction,
        stratified_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::MetricKind;
    use crate::data::synth_imbalanced;
    use crate::loss::LossSpec;
    use crate::network::NetworkConfig;
    use crate::approx::AmplifyingScale;

    fn separable_toy() -> crate::data::Dataset {
        // Wide separation: effectively linearly separable.
        synth_imbalanced(200, 2, 0.5, 8.0, 11).unwrap()
    }

    #[test]
    fn slp_learns_separable_data() {
        let d = separable_toy();
        let net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
        let tc = TrainConfig::slp(LossSpec::any(MetricKind::Accuracy), 5);
        let report = train(net, d.x.view(), &d.y, &tc).unwrap();
        let (_, predicted) = report.network.predict(d.x.view()).unwrap();
        let correct = predicted
            .iter()
            .zip(&d.y)
            .filter(|(a, b)| a == b)
            .count();
        assert!(
            correct as f64 / d.n() as f64 >= 0.99,
            "training accuracy {}",
            correct as f64 / d.n() as f64
        );
        assert_eq!(report.loss_curve.len(), tc.epochs);
    }

    #[test]
    fn tiny_scale_learns_worse_than_default() {
        let d = separable_toy();
        let spec = LossSpec::any(MetricKind::Accuracy);
        let tc_default = TrainConfig {
            epochs: 300,
            ..TrainConfig::slp(spec, 5)
        };
        let tc_small = TrainConfig {
            loss: spec.with_scale(AmplifyingScale::new(1.0).unwrap()),
            ..tc_default
        };
        let net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
        let r_default = train(net.clone(), d.x.view(), &d.y, &tc_default).unwrap();
        let r_small = train(net, d.x.view(), &d.y, &tc_small).unwrap();
        let final_default = *r_default.loss_curve.last().unwrap();
        let final_small = *r_small.loss_curve.last().unwrap();
        assert!(
            final_small > final_default + 0.05,
            "L=1 final loss {final_small} vs L=73 {final_default}"
        );
    }

    #[test]
    fn saturated_outputs_freeze_all_parameters() {
        // Far-out bias saturates p toward 1, and with L=100 the amplified
        // value rounds to exactly 1.0, so every gradient is exactly zero.
        let d = separable_toy();
        let mut net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
        net.set_param(0, 0.0);
        net.set_param(1, 0.0);
        net.set_param(2, 60.0); // output bias
        let before: Vec<f64> = (0..net.param_count()).map(|i| net.get_param(i)).collect();
        let tc = TrainConfig {
            loss: LossSpec::any(MetricKind::Accuracy)
                .with_scale(AmplifyingScale::new(100.0).unwrap()),
            epochs: 20,
            ..TrainConfig::slp(LossSpec::any(MetricKind::Accuracy), 5)
        };
        let report = train(net, d.x.view(), &d.y, &tc).unwrap();
        let after: Vec<f64> = (0..report.network.param_count())
            .map(|i| report.network.get_param(i))
            .collect();
        assert_eq!(before, after, "no-more-update stall should freeze parameters");
    }

    #[test]
    fn identical_seeds_give_identical_reports() {
        let d = synth_imbalanced(120, 3, 0.3, 2.0, 9).unwrap();
        let net = Network::init(&NetworkConfig::mlp(3, 2)).unwrap();
        let tc = TrainConfig {
            epochs: 30,
            ..TrainConfig::mlp(LossSpec::any(MetricKind::f1()), 21)
        };
        let a = train(net.clone(), d.x.view(), &d.y, &tc).unwrap();
        let b = train(net, d.x.view(), &d.y, &tc).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.network, b.network);
    }

    #[test]
    fn class_ratio_loss_engages_stratified_batches() {
        let d = synth_imbalanced(100, 2, 0.1, 2.0, 13).unwrap();
        let net = Network::init(&NetworkConfig::mlp(2, 2)).unwrap();
        // Fraction 0.05 gives 5-sample batches: with 10 positives in 20
        // batches, plain shuffling must drop the class somewhere.
        let tc = TrainConfig {
            batch_fraction: 0.05,
            epochs: 10,
            ..TrainConfig::mlp(LossSpec::any(MetricKind::GMean), 3)
        };
        let report = train(net, d.x.view(), &d.y, &tc).unwrap();
        assert!(report.stratified_fallback);
        assert_eq!(report.loss_curve.len(), 10);
    }

    #[test]
    fn single_class_dataset_fails_for_ratio_loss() {
        let d = synth_imbalanced(40, 2, 0.5, 2.0, 13).unwrap();
        let labels = vec![1u8; 40];
        let net = Network::init(&NetworkConfig::slp(2, 2)).unwrap();
        let tc = TrainConfig::slp(LossSpec::any(MetricKind::BalancedAccuracy), 3);
        let err = train(net, d.x.view(), &labels, &tc);
        assert!(matches!(err, Err(Error::DegenerateClass(_))));
    }

    #[test]
    fn final_loss_not_above_initial_on_separable_data() {
        let d = separable_toy();
        for spec in [
            LossSpec::mse(),
            LossSpec::bce(),
            LossSpec::any(MetricKind::Accuracy),
            LossSpec::any(MetricKind::f1()),
            LossSpec::any(MetricKind::GMean),
            LossSpec::any(MetricKind::BalancedAccuracy),
        ] {
            let net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
            let tc = TrainConfig {
                epochs: 200,
                ..TrainConfig::slp(spec, 5)
            };
            let report = train(net, d.x.view(), &d.y, &tc).unwrap();
            let first = report.loss_curve[0];
            let last = *report.loss_curve.last().unwrap();
            assert!(last <= first, "{}: {first} -> {last}", spec.label());
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let net = Network::init(&NetworkConfig::slp(2, 1)).unwrap();
        let x = ndarray::Array2::<f64>::zeros((0, 2));
        let tc = TrainConfig::slp(LossSpec::mse(), 1);
        assert!(train(net, x.view(), &[], &tc).is_err());
    }
}
