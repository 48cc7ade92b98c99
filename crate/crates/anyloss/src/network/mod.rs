//! Single-layer and one-hidden-layer sigmoid networks with manual
//! backpropagation.
//!
//! The forward pass produces three per-sample vectors: net values
//! (logits), class probabilities (sigmoid), and amplified probabilities
//! (the approximation function applied to the probabilities). The backward
//! pass assembles the chain
//!
//! ```text
//! ∂loss/∂w = ∂loss/∂yh · [L yh (1 - yh)] · [p (1 - p)] · ∂z/∂w
//! ```
//!
//! where the first factor comes from the loss module; for the MSE/BCE
//! baselines the gradient arrives with respect to the probabilities and the
//! amplifier factor is skipped.

mod batchnorm;
mod io;
mod train;

pub use batchnorm::{BatchNorm, BnCache};
pub use io::{load_model, save_model, SavedModel};
pub use train::{train, TrainConfig, TrainReport};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::approx::{approximate, approximate_derivative, sigmoid, AmplifyingScale};
use crate::confusion::threshold_labels;
use crate::error::{Error, Result};

/// Network shape: a bare sigmoid unit, or one hidden sigmoid layer with
/// optional batch normalization before the activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Slp,
    Mlp { hidden: usize, batch_norm: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub arch: Architecture,
    pub input_dim: usize,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn slp(input_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            arch: Architecture::Slp,
            input_dim,
            seed,
        }
    }

    /// Default multi-layer shape: two hidden nodes, batch norm on.
    pub fn mlp(input_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            arch: Architecture::Mlp {
                hidden: 2,
                batch_norm: true,
            },
            input_dim,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// `input_dim x hidden` weight matrix.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub batch_norm: Option<BatchNorm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    hidden: Option<HiddenLayer>,
    out_weights: Array1<f64>,
    out_bias: f64,
}

/// Whether a forward pass normalizes with batch statistics (training) or
/// the running averages (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Train,
    Eval,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Array2<f64>,
    pub hidden_pre: Option<Array2<f64>>,
    pub bn_cache: Option<BnCache>,
    pub hidden_act: Option<Array2<f64>>,
    /// Output-layer net values.
    pub logits: Array1<f64>,
    /// Sigmoid of the logits.
    pub probs: Array1<f64>,
    /// Amplified probabilities `A(p; L)`.
    pub amplified: Array1<f64>,
}

/// Gradient of the loss with respect to the output-layer activations,
/// as produced by the loss module.
#[derive(Debug, Clone, Copy)]
pub enum OutputGrad<'a> {
    /// AnyLoss gradient w.r.t. the amplified probabilities.
    WrtAmplified(&'a [f64]),
    /// Baseline (MSE/BCE) gradient w.r.t. the raw probabilities.
    WrtProbs(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct BnGradients {
    pub gamma: Array1<f64>,
    pub shift: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HiddenGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub batch_norm: Option<BnGradients>,
}

/// Parameter gradients mirroring the network layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub hidden: Option<HiddenGradients>,
    pub out_weights: Array1<f64>,
    pub out_bias: f64,
}

impl Gradients {
    /// Flattened view in the same order as [`Network::get_param`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let Some(h) = &self.hidden {
            out.extend(h.weights.iter().copied());
            out.extend(h.bias.iter().copied());
            if let Some(bn) = &h.batch_norm {
                out.extend(bn.gamma.iter().copied());
                out.extend(bn.shift.iter().copied());
            }
        }
        out.extend(self.out_weights.iter().copied());
        out.push(self.out_bias);
        out
    }
}

impl Network {
    /// Seeded initialization: weights uniform in `±1/sqrt(fan_in)`, biases
    /// zero, batch-norm scale 1 and shift 0.
    pub fn init(config: &NetworkConfig) -> Result<Network> {
        if config.input_dim == 0 {
            return Err(Error::contract("input dimension must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |fan_in: usize, count: usize| -> Vec<f64> {
            let lim = 1.0 / (fan_in as f64).sqrt();
            (0..count).map(|_| rng.gen_range(-lim..lim)).collect()
        };
        let m = config.input_dim;
        match config.arch {
            Architecture::Slp => Ok(Network {
                config: *config,
                hidden: None,
                out_weights: Array1::from(uniform(m, m)),
                out_bias: 0.0,
            }),
            Architecture::Mlp { hidden, batch_norm } => {
                if hidden == 0 {
                    return Err(Error::contract("hidden layer needs at least 1 node"));
                }
                let w1 = Array2::from_shape_vec((m, hidden), uniform(m, m * hidden))
                    .expect("shape matches element count");
                Ok(Network {
                    config: *config,
                    hidden: Some(HiddenLayer {
                        weights: w1,
                        bias: Array1::zeros(hidden),
                        batch_norm: batch_norm.then(|| BatchNorm::new(hidden)),
                    }),
                    out_weights: Array1::from(uniform(hidden, hidden)),
                    out_bias: 0.0,
                })
            }
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn hidden(&self) -> Option<&HiddenLayer> {
        self.hidden.as_ref()
    }

    pub fn out_weights(&self) -> &Array1<f64> {
        &self.out_weights
    }

    pub fn out_bias(&self) -> f64 {
        self.out_bias
    }

    /// Forward pass over a batch. Training mode normalizes with batch
    /// statistics; it does not touch the running averages — call
    /// [`Network::update_running_stats`] with the cache to do that.
    pub fn forward(
        &self,
        x: ArrayView2<'_, f64>,
        scale: AmplifyingScale,
        mode: ForwardMode,
    ) -> Result<ForwardCache> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::contract(format!(
                "input has {} features, network expects {}",
                x.ncols(),
                self.config.input_dim
            )));
        }
        if mode == ForwardMode::Train && x.nrows() == 0 {
            return Err(Error::contract("training forward needs a non-empty batch"));
        }

        let inputs = x.to_owned();
        let (hidden_pre, bn_cache, hidden_act, out_input) = match &self.hidden {
            None => (None, None, None, inputs.clone()),
            Some(layer) => {
                let mut pre = inputs.dot(&layer.weights);
                for mut row in pre.rows_mut() {
                    row.zip_mut_with(&layer.bias, |v, &b| *v += b);
                }
                let (bn_out, bn_cache) = match (&layer.batch_norm, mode) {
                    (Some(bn), ForwardMode::Train) => {
                        let (out, cache) = bn.forward_train(&pre);
                        (out, Some(cache))
                    }
                    (Some(bn), ForwardMode::Eval) => (bn.forward_eval(&pre), None),
                    (None, _) => (pre.clone(), None),
                };
                let mut act = bn_out;
                for v in act.iter_mut() {
                    *v = sigmoid(*v)?;
                }
                (Some(pre), bn_cache, Some(act.clone()), act)
            }
        };

        let mut logits = out_input.dot(&self.out_weights);
        logits += self.out_bias;
        let probs = logits.mapv(sigmoid).into_iter().collect::<Result<Vec<_>>>()?;
        let amplified = probs
            .iter()
            .map(|&p| approximate(p, scale))
            .collect::<Result<Vec<_>>>()?;

        Ok(ForwardCache {
            inputs,
            hidden_pre,
            bn_cache,
            hidden_act,
            logits,
            probs: Array1::from(probs),
            amplified: Array1::from(amplified),
        })
    }

    /// Folds the batch statistics of a training forward pass into the
    /// batch-norm running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        if let (Some(layer), Some(bn_cache)) = (&mut self.hidden, &cache.bn_cache) {
            if let Some(bn) = &mut layer.batch_norm {
                bn.update_running(bn_cache);
            }
        }
    }

    /// Backpropagates a loss gradient through the network, returning the
    /// gradient of the loss with respect to every parameter.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad: OutputGrad<'_>,
        scale: AmplifyingScale,
    ) -> Result<Gradients> {
        let n = cache.logits.len();
        let grad_len = match grad {
            OutputGrad::WrtAmplified(g) | OutputGrad::WrtProbs(g) => g.len(),
        };
        if grad_len != n {
            return Err(Error::LengthMismatch {
                left: grad_len,
                right: n,
            });
        }
        if cache.inputs.ncols() != self.config.input_dim
            || (self.hidden.is_some() != cache.hidden_act.is_some())
        {
            return Err(Error::contract("forward cache does not match this network"));
        }

        // Gradient w.r.t. the output-layer logits. The amplifier factor
        // L·yh·(1-yh) appears only on the AnyLoss route.
        let delta: Array1<f64> = match grad {
            OutputGrad::WrtAmplified(g) => (0..n)
                .map(|i| {
                    let amp = approximate_derivative(cache.amplified[i], scale);
                    let sig = cache.probs[i] * (1.0 - cache.probs[i]);
                    g[i] * amp * sig
                })
                .collect(),
            OutputGrad::WrtProbs(g) => (0..n)
                .map(|i| g[i] * cache.probs[i] * (1.0 - cache.probs[i]))
                .collect(),
        };

        let out_input = match &cache.hidden_act {
            Some(act) => act,
            None => &cache.inputs,
        };
        let out_weights_grad = out_input.t().dot(&delta);
        let out_bias_grad = delta.sum();

        let hidden = match &self.hidden {
            None => None,
            Some(layer) => {
                let act = cache
                    .hidden_act
                    .as_ref()
                    .ok_or_else(|| Error::contract("cache missing hidden activations"))?;
                // d(hidden activation) = delta ⊗ out_weights
                let mut d_act = Array2::zeros(act.raw_dim());
                for (i, mut row) in d_act.rows_mut().into_iter().enumerate() {
                    row.assign(&(&self.out_weights * delta[i]));
                }
                // through the sigmoid activation
                let d_pre_act = &d_act * &act.mapv(|h| h * (1.0 - h));
                let (d_hidden_pre, bn_grads) = match &layer.batch_norm {
                    Some(bn) => {
                        let bn_cache = cache
                            .bn_cache
                            .as_ref()
                            .ok_or_else(|| Error::contract("cache missing batch-norm stats"))?;
                        let (dx, d_gamma, d_shift) = bn.backward(bn_cache, &d_pre_act);
                        (dx, Some(BnGradients { gamma: d_gamma, shift: d_shift }))
                    }
                    None => (d_pre_act, None),
                };
                Some(HiddenGradients {
                    weights: cache.inputs.t().dot(&d_hidden_pre),
                    bias: d_hidden_pre.sum_axis(Axis(0)),
                    batch_norm: bn_grads,
                })
            }
        };

        Ok(Gradients {
            hidden,
            out_weights: out_weights_grad,
            out_bias: out_bias_grad,
        })
    }

    /// Plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        if let (Some(layer), Some(g)) = (&mut self.hidden, &grads.hidden) {
            layer
                .weights
                .zip_mut_with(&g.weights, |w, &d| *w -= learning_rate * d);
            layer
                .bias
                .zip_mut_with(&g.bias, |b, &d| *b -= learning_rate * d);
            if let (Some(bn), Some(bg)) = (&mut layer.batch_norm, &g.batch_norm) {
                bn.gamma
                    .zip_mut_with(&bg.gamma, |v, &d| *v -= learning_rate * d);
                bn.shift
                    .zip_mut_with(&bg.shift, |v, &d| *v -= learning_rate * d);
            }
        }
        self.out_weights
            .zip_mut_with(&grads.out_weights, |w, &d| *w -= learning_rate * d);
        self.out_bias -= learning_rate * grads.out_bias;
    }

    /// Inference: probabilities and thresholded labels. Prediction
    /// thresholds the probabilities, not the amplified values.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Vec<u8>)> {
        let cache = self.forward(x, AmplifyingScale::DEFAULT, ForwardMode::Eval)?;
        let probs = cache.probs.to_vec();
        let labels = threshold_labels(&probs);
        Ok((probs, labels))
    }

    /// Number of learnable parameters (running statistics excluded).
    pub fn param_count(&self) -> usize {
        let mut count = self.out_weights.len() + 1;
        if let Some(layer) = &self.hidden {
            count += layer.weights.len() + layer.bias.len();
            if let Some(bn) = &layer.batch_norm {
                count += bn.gamma.len() + bn.shift.len();
            }
        }
        count
    }

    /// Reads parameter `idx` in the flat order: hidden weights (row-major),
    /// hidden bias, bn gamma, bn shift, output weights, output bias.
    pub fn get_param(&self, idx: usize) -> f64 {
        let mut i = idx;
        if let Some(layer) = &self.hidden {
            if i < layer.weights.len() {
                return layer.weights.as_slice().expect("contiguous")[i];
            }
            i -= layer.weights.len();
            if i < layer.bias.len() {
                return layer.bias[i];
            }
            i -= layer.bias.len();
            if let Some(bn) = &layer.batch_norm {
                if i < bn.gamma.len() {
                    return bn.gamma[i];
                }
                i -= bn.gamma.len();
                if i < bn.shift.len() {
                    return bn.shift[i];
                }
                i -= bn.shift.len();
            }
        }
        if i < self.out_weights.len() {
            return self.out_weights[i];
        }
        i -= self.out_weights.len();
        assert_eq!(i, 0, "parameter index out of range");
        self.out_bias
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        *self.param_slot_mut(idx) = value;
    }

    fn param_slot_mut(&mut self, idx: usize) -> &mut f64 {
        let mut i = idx;
        if let Some(layer) = &mut self.hidden {
            if i < layer.weights.len() {
                return &mut layer.weights.as_slice_mut().expect("contiguous")[i];
            }
            i -= layer.weights.len();
            if i < layer.bias.len() {
                return &mut layer.bias[i];
            }
            i -= layer.bias.len();
            if let Some(bn) = &mut layer.batch_norm {
                if i < bn.gamma.len() {
                    return &mut bn.gamma[i];
                }
                i -= bn.gamma.len();
                if i < bn.shift.len() {
                    return &mut bn.shift[i];
                }
                i -= bn.shift.len();
            }
        }
        if i < self.out_weights.len() {
            return &mut self.out_weights[i];
        }
        i -= self.out_weights.len();
        assert_eq!(i, 0, "parameter index out of range");
        &mut self.out_bias
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::MetricKind;
    use crate::loss::{loss_grad_yh, LossSpec};
    use ndarray::array;

    #[test]
    fn init_is_seed_deterministic() {
        let cfg = NetworkConfig::slp(3, 42);
        let a = Network::init(&cfg).unwrap();
        let b = Network::init(&cfg).unwrap();
        assert_eq!(a, b);
        let c = Network::init(&NetworkConfig::slp(3, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mlp_shapes() {
        let net = Network::init(&NetworkConfig::mlp(5, 1)).unwrap();
        let layer = net.hidden().unwrap();
        assert_eq!(layer.weights.shape(), &[5, 2]);
        assert_eq!(layer.bias.len(), 2);
        assert_eq!(net.out_weights().len(), 2);
        assert!(layer.batch_norm.is_some());
        // 10 + 2 + 2 + 2 + 2 + 1
        assert_eq!(net.param_count(), 19);
    }

    #[test]
    fn zero_input_dim_rejected() {
        assert!(Network::init(&NetworkConfig::slp(0, 1)).is_err());
    }

    #[test]
    fn zero_weights_give_half_probabilities() {
        let mut net = Network::init(&NetworkConfig::slp(2, 7)).unwrap();
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        let x = array![[1.0, -2.0], [0.3, 0.9]];
        let cache = net
            .forward(x.view(), AmplifyingScale::DEFAULT, ForwardMode::Eval)
            .unwrap();
        assert!(cache.probs.iter().all(|&p| p == 0.5));
        assert!(cache.amplified.iter().all(|&a| a == 0.5));
    }

    #[test]
    fn forward_single_sample_matches_hand_computation() {
        let mut net = Network::init(&NetworkConfig::slp(1, 7)).unwrap();
        net.set_param(0, 3f64.ln()); // weight
        net.set_param(1, 0.0); // bias
        let x = array![[1.0]];
        let cache = net
            .forward(x.view(), AmplifyingScale::DEFAULT, ForwardMode::Eval)
            .unwrap();
        assert!((cache.logits[0] - 3f64.ln()).abs() < 1e-15);
        assert!((cache.probs[0] - 0.75).abs() < 1e-15);
        // A(0.75; 73) = 1 / (1 + e^-18.25)
        let expected = 1.0 / (1.0 + (-18.25f64).exp());
        assert!((cache.amplified[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Network::init(&NetworkConfig::slp(3, 7)).unwrap();
        let x = array![[1.0, 2.0]];
        assert!(net
            .forward(x.view(), AmplifyingScale::DEFAULT, ForwardMode::Eval)
            .is_err());
    }

    #[test]
    fn backward_hand_value_single_sample() {
        // x=[1], y=1, zero weights => p=0.5, yh=0.5. Accuracy grad -1,
        // amplifier factor 73*0.25, sigmoid factor 0.25.
        let mut net = Network::init(&NetworkConfig::slp(1, 7)).unwrap();
        net.set_param(0, 0.0);
        net.set_param(1, 0.0);
        let x = array![[1.0]];
        let cache = net
            .forward(x.view(), AmplifyingScale::DEFAULT, ForwardMode::Train)
            .unwrap();
        let lg = loss_grad_yh(
            &LossSpec::any(MetricKind::Accuracy),
            &[1],
            cache.amplified.as_slice().unwrap(),
        )
        .unwrap();
        let grads = net
            .backward(&cache, OutputGrad::WrtAmplified(&lg.grad), AmplifyingScale::DEFAULT)
            .unwrap();
        assert!((grads.out_weights[0] - (-4.5625)).abs() < 1e-12);
        assert!((grads.out_bias - (-4.5625)).abs() < 1e-12);
    }

    #[test]
    fn zero_output_grad_gives_zero_parameter_grads() {
        let net = Network::init(&NetworkConfig::mlp(3, 11)).unwrap();
        let x = array![[0.1, -0.4, 1.2], [0.5, 0.2, -0.3]];
        let cache = net
            .forward(x.view(), AmplifyingScale::DEFAULT, ForwardMode::Train)
            .unwrap();
        let zeros = vec![0.0; 2];
        let grads = net
            .backward(&cache, OutputGrad::WrtAmplified(&zeros), AmplifyingScale::DEFAULT)
            .unwrap();
        assert!(grads.flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn predict_empty_input_gives_empty_output() {
        let net = Network::init(&NetworkConfig::slp(2, 3)).unwrap();
        let x = Array2::<f64>::zeros((0, 2));
        let (probs, labels) = net.predict(x.view()).unwrap();
        assert!(probs.is_empty());
        assert!(labels.is_empty());
    }

    #[test]
    fn predict_zero_weights_thresholds_tie_to_positive() {
        let mut net = Network::init(&NetworkConfig::slp(2, 3)).unwrap();
        for i in 0..net.param_count() {
            net.set_param(i, 0.0);
        }
        let x = array![[1.0, 2.0], [-3.0, 0.5]];
        let (_, labels) = net.predict(x.view()).unwrap();
        assert_eq!(labels, vec![1, 1]);
    }

    #[test]
    fn param_roundtrip_covers_all_slots() {
        let mut net = Network::init(&NetworkConfig::mlp(4, 5)).unwrap();
        let count = net.param_count();
        for i in 0..count {
            net.set_param(i, i as f64 + 0.5);
        }
        for i in 0..count {
            assert_eq!(net.get_param(i), i as f64 + 0.5);
        }
    }
}
