// Scratch probe for desk-scale protocol numbers; not part of the library.
use anyloss::confusion::MetricKind;
use anyloss::data::synth_imbalanced;
use anyloss::eval::cross_validate;
use anyloss::loss::LossSpec;
use anyloss::network::{NetworkConfig, TrainConfig};

fn main() {
    let nc = NetworkConfig::slp(2, 7);
    let k = 10;

    for (sep, seed) in [(1.5, 42_424_242u64), (1.8, 42_424_242), (1.5, 7), (1.8, 7)] {
        println!("=== sep {sep} seed {seed}");
        let d = synth_imbalanced(10_000, 2, 0.1, sep, seed).unwrap();
        let runs = [
            ("BCE", LossSpec::bce(), 0.2),
            ("L_F1", LossSpec::any(MetricKind::f1()), 0.01),
            ("L_B", LossSpec::any(MetricKind::BalancedAccuracy), 0.01),
        ];
        for (name, spec, lr) in runs {
            let tc = TrainConfig {
                learning_rate: lr,
                ..TrainConfig::slp(spec, 99)
            };
            let t0 = std::time::Instant::now();
            let r = cross_validate(&d, &nc, &tc, k).unwrap();
            println!(
                "{name:5} lr={lr:<5} acc={:.4} f1={:.4} gmean={:.4} bacc={:.4}  ({:.1}s)",
                r.mean.accuracy,
                r.mean.f_beta,
                r.mean.g_mean,
                r.mean.balanced_accuracy,
                t0.elapsed().as_secs_f64(),
            );
        }
    }
}
