//! Bayesian sign test with a region of practical equivalence (rope).
//!
//! Score differences are trichotomized against the rope half-width `r`:
//! losses (`d < -r`), practical ties (`|d| <= r`), and wins (`d > r`). The
//! posterior over the three outcome probabilities is a Dirichlet with one
//! pseudo-count placed on the rope cell, and the reported probabilities are
//! Monte-Carlo estimates of each component being the strictly largest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignTestResult {
    pub p_win: f64,
    pub p_rope: f64,
    pub p_lose: f64,
    /// Rope half-width the differences were trichotomized with.
    pub rope: f64,
    pub n_lose: usize,
    pub n_rope: usize,
    pub n_win: usize,
}

/// Runs the sign test on paired score differences (positive = first system
/// better). `mc_samples` controls the Monte-Carlo resolution; 50 000 gives
/// roughly two stable decimals.
pub fn bayesian_sign_test(
    diffs: &[f64],
    rope: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<SignTestResult> {
    if diffs.is_empty() {
        return Err(Error::contract("sign test needs at least one difference"));
    }
    if !(rope.is_finite() && rope >= 0.0) {
        return Err(Error::contract(format!(
            "rope must be a non-negative real, got {rope}"
        )));
    }
    if mc_samples == 0 {
        return Err(Error::contract("need at least one Monte-Carlo sample"));
    }

    let n_lose = diffs.iter().filter(|&&d| d < -rope).count();
    let n_win = diffs.iter().filter(|&&d| d > rope).count();
    let n_rope = diffs.len() - n_lose - n_win;

    // Dirichlet concentrations; the single prior pseudo-count sits on the
    // rope cell (no difference until the data says otherwise).
    let alphas = [n_lose as f64, n_rope as f64 + 1.0, n_win as f64];
    let gammas: Vec<Option<Gamma<f64>>> = alphas
        .iter()
        .map(|&a| {
            if a > 0.0 {
                Some(Gamma::new(a, 1.0).expect("positive shape"))
            } else {
                None
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = [0usize; 3];
    for _ in 0..mc_samples {
        let draw: Vec<f64> = gammas
            .iter()
            .map(|g| g.as_ref().map_or(0.0, |g| g.sample(&mut rng)))
            .collect();
        let (lose, rope_w, win) = (draw[0], draw[1], draw[2]);
        if win > rope_w && win > lose {
            hits[2] += 1;
        } else if lose > rope_w && lose > win {
            hits[0] += 1;
        } else {
            // Strict ties (only possible through zero cells) stay on the rope.
            hits[1] += 1;
        }
    }
    let total = mc_samples as f64;
    Ok(SignTestResult {
        p_win: hits[2] as f64 / total,
        p_rope: hits[1] as f64 / total,
        p_lose: hits[0] as f64 / total,
        rope,
        n_lose,
        n_rope,
        n_win,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive_differences_win() {
        let diffs = vec![0.2; 12];
        let r = bayesian_sign_test(&diffs, 0.01, 50_000, 1).unwrap();
        assert!(r.p_win >= 0.999, "p_win = {}", r.p_win);
        assert_eq!(r.n_win, 12);
    }

    #[test]
    fn all_zero_differences_land_on_the_rope() {
        let diffs = vec![0.0; 12];
        let r = bayesian_sign_test(&diffs, 0.01, 50_000, 1).unwrap();
        assert!(r.p_rope >= 0.999, "p_rope = {}", r.p_rope);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let diffs = vec![0.2, 0.2, -0.3, 0.005, 0.0, 0.4, -0.02];
        let r = bayesian_sign_test(&diffs, 0.01, 20_000, 7).unwrap();
        assert!((r.p_win + r.p_rope + r.p_lose - 1.0).abs() < 1e-9);
        for p in [r.p_win, r.p_rope, r.p_lose] {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn independent_seeds_agree_on_mixed_case() {
        let mut diffs = vec![0.2; 9];
        diffs.push(-0.2);
        let a = bayesian_sign_test(&diffs, 0.01, 1_000_000, 11).unwrap();
        let b = bayesian_sign_test(&diffs, 0.01, 1_000_000, 982_451_653).unwrap();
        assert!(
            (a.p_win - b.p_win).abs() <= 0.005,
            "p_win {} vs {}",
            a.p_win,
            b.p_win
        );
        assert!((a.p_lose - b.p_lose).abs() <= 0.005);
    }

    #[test]
    fn widening_the_rope_grows_rope_probability() {
        let diffs = vec![0.02, 0.04, -0.03, 0.012, -0.008, 0.06, 0.03, -0.04];
        let narrow = bayesian_sign_test(&diffs, 0.01, 100_000, 5).unwrap();
        let wide = bayesian_sign_test(&diffs, 0.05, 100_000, 5).unwrap();
        assert!(wide.n_rope > narrow.n_rope);
        assert!(wide.p_rope > narrow.p_rope);
    }

    #[test]
    fn contract_errors() {
        assert!(bayesian_sign_test(&[], 0.01, 100, 1).is_err());
        assert!(bayesian_sign_test(&[0.1], -0.01, 100, 1).is_err());
        assert!(bayesian_sign_test(&[0.1], 0.01, 0, 1).is_err());
    }
}
