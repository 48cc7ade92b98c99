//! Gradient verification against central finite differences.
//!
//! Two layers of checks:
//!
//! * **loss-level** — the analytic gradient of each AnyLoss variant with
//!   respect to the amplified probabilities, against finite differences of
//!   the loss value (tolerance 1e-5);
//! * **end-to-end** — the backpropagated gradient of every loss spec with
//!   respect to every network parameter, for both architectures, against
//!   finite differences of the full forward + loss pipeline (tolerance
//!   1e-4).
//!
//! The finite-difference side only ever calls `loss_value` and `forward`,
//! so it stays independent of the analytic-gradient code paths it judges.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::confusion::MetricKind;
use crate::error::Result;
use crate::loss::{baseline_grad_p, loss_grad_yh, loss_value, LossSpec};
use crate::network::{Architecture, ForwardMode, Network, NetworkConfig, OutputGrad};
use crate::rng::derive_seed;

/// Result of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub max_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    /// The outcome with the largest error-to-tolerance ratio.
    pub fn worst(&self) -> Option<&CheckOutcome> {
        self.outcomes
            .iter()
            .max_by(|a, b| (a.max_err / a.tolerance).total_cmp(&(b.max_err / b.tolerance)))
    }
}

/// Scaled per-component error: relative where either side is large,
/// absolute (through the floor) where both are near zero.
fn max_scaled_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

const LOSS_TOL: f64 = 1e-5;
const LOSS_FLOOR: f64 = 1e-3;
const NET_TOL: f64 = 1e-4;
const NET_FLOOR: f64 = 1e-4;

fn any_specs() -> Vec<LossSpec> {
    vec![
        LossSpec::any(MetricKind::Accuracy),
        LossSpec::any(MetricKind::f1()),
        LossSpec::any(MetricKind::GMean),
        LossSpec::any(MetricKind::BalancedAccuracy),
    ]
}

fn all_specs() -> Vec<LossSpec> {
    let mut specs = vec![LossSpec::mse(), LossSpec::bce()];
    specs.extend(any_specs());
    specs
}

/// Checks the analytic loss gradients of the AnyLoss variants against
/// central finite differences over `instances` random batches each.
///
/// `sabotage` flips the sign of the balanced-accuracy analytic gradient;
/// it exists so callers can demonstrate that the checker catches a wrong
/// gradient.
pub fn loss_gradient_checks(instances: usize, seed: u64, sabotage: bool) -> Result<CheckReport> {
    let mut outcomes = Vec::new();
    for (spec_idx, spec) in any_specs().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, spec_idx as u64));
        let mut max_err = 0.0f64;
        for _ in 0..instances {
            let n = rng.gen_range(2..=50);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1) as u8).collect();
            labels[0] = 1;
            labels[1] = 0;
            let amplified: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();

            let mut analytic = loss_grad_yh(&spec, &labels, &amplified)?.grad;
            if sabotage && matches!(spec.kind, crate::loss::LossKind::AnyLoss(MetricKind::BalancedAccuracy)) {
                analytic.iter_mut().for_each(|g| *g = -*g);
            }

            let h = 1e-6;
            let numeric: Vec<f64> = (0..n)
                .map(|i| {
                    let mut plus = amplified.clone();
                    let mut minus = amplified.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    Ok((loss_value(&spec, &labels, &plus)?
                        - loss_value(&spec, &labels, &minus)?)
                        / (2.0 * h))
                })
                .collect::<Result<Vec<_>>>()?;
            max_err = max_err.max(max_scaled_err(&analytic, &numeric, LOSS_FLOOR));
        }
        outcomes.push(CheckOutcome {
            name: format!("loss/{}", spec.label()),
            max_err,
            tolerance: LOSS_TOL,
            passed: max_err <= LOSS_TOL,
        });
    }
    Ok(CheckReport { outcomes })
}

fn arch_label(arch: Architecture) -> &'static str {
    match arch {
        Architecture::Slp => "slp",
        Architecture::Mlp { .. } => "mlp",
    }
}

/// End-to-end loss of a parameter vector, via a training-mode forward pass.
fn end_to_end_loss(
    net: &Network,
    x: &Array2<f64>,
    labels: &[u8],
    spec: &LossSpec,
) -> Result<f64> {
    let cache = net.forward(x.view(), spec.scale, ForwardMode::Train)?;
    if spec.is_any_loss() {
        loss_value(spec, labels, cache.amplified.as_slice().expect("contiguous"))
    } else {
        loss_value(spec, labels, cache.probs.as_slice().expect("contiguous"))
    }
}

/// Checks backpropagated parameter gradients for every loss spec and both
/// architectures against central finite differences of the end-to-end
/// loss, over `instances` random instances each.
pub fn network_gradient_checks(instances: usize, seed: u64, sabotage: bool) -> Result<CheckReport> {
    let archs = [
        Architecture::Slp,
        Architecture::Mlp {
            hidden: 2,
            batch_norm: true,
        },
    ];
    let (n, m) = (16usize, 4usize);
    let mut outcomes = Vec::new();
    for (arch_idx, arch) in archs.into_iter().enumerate() {
        for (spec_idx, spec) in all_specs().into_iter().enumerate() {
            let stream = (arch_idx * 16 + spec_idx) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 100 + stream));
            let mut max_err = 0.0f64;
            for instance in 0..instances {
                let cfg = NetworkConfig {
                    arch,
                    input_dim: m,
                    seed: derive_seed(seed, 10_000 + stream * 1000 + instance as u64),
                };
                let net = Network::init(&cfg)?;
                let mut x = Array2::zeros((n, m));
                x.iter_mut()
                    .for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
                let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1) as u8).collect();
                labels[0] = 1;
                labels[1] = 0;

                let cache = net.forward(x.view(), spec.scale, ForwardMode::Train)?;
                let mut analytic = if spec.is_any_loss() {
                    let lg = loss_grad_yh(
                        &spec,
                        &labels,
                        cache.amplified.as_slice().expect("contiguous"),
                    )?;
                    net.backward(&cache, OutputGrad::WrtAmplified(&lg.grad), spec.scale)?
                        .flat()
                } else {
                    let lg = baseline_grad_p(
                        &spec,
                        &labels,
                        cache.probs.as_slice().expect("contiguous"),
                    )?;
                    net.backward(&cache, OutputGrad::WrtProbs(&lg.grad), spec.scale)?
                        .flat()
                };
                if sabotage
                    && matches!(
                        spec.kind,
                        crate::loss::LossKind::AnyLoss(MetricKind::BalancedAccuracy)
                    )
                {
                    analytic.iter_mut().for_each(|g| *g = -*g);
                }

                let h = 1e-5;
                let numeric: Vec<f64> = (0..net.param_count())
                    .map(|idx| {
                        let mut plus = net.clone();
                        plus.set_param(idx, plus.get_param(idx) + h);
                        let mut minus = net.clone();
                        minus.set_param(idx, minus.get_param(idx) - h);
                        Ok((end_to_end_loss(&plus, &x, &labels, &spec)?
                            - end_to_end_loss(&minus, &x, &labels, &spec)?)
                            / (2.0 * h))
                    })
                    .collect::<Result<Vec<_>>>()?;
                max_err = max_err.max(max_scaled_err(&analytic, &numeric, NET_FLOOR));
            }
            outcomes.push(CheckOutcome {
                name: format!("network/{}/{}", arch_label(arch), spec.label()),
                max_err,
                tolerance: NET_TOL,
                passed: max_err <= NET_TOL,
            });
        }
    }
    Ok(CheckReport { outcomes })
}

/// Runs the loss-level and end-to-end checks with `instances` random
/// instances per combination.
pub fn full_suite(instances: usize, seed: u64, sabotage: bool) -> Result<CheckReport> {
    let mut outcomes = loss_gradient_checks(instances, seed, sabotage)?.outcomes;
    outcomes.extend(network_gradient_checks(instances, seed, sabotage)?.outcomes);
    Ok(CheckReport { outcomes })
}
