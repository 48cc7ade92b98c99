//! Batch normalization with learnable scale/shift and running statistics.

use ndarray::{Array1, Array2, Axis};

/// Per-feature batch normalization state.
///
/// Training-mode forward normalizes with the statistics of the current
/// batch (biased variance); inference uses the running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub shift: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub eps: f64,
    pub momentum: f64,
}

/// Intermediates the backward pass needs, plus the batch statistics used
/// to refresh the running averages.
#[derive(Debug, Clone)]
pub struct BnCache {
    /// Normalized pre-scale values `(x - mean) / sqrt(var + eps)`.
    pub normalized: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub batch_mean: Array1<f64>,
    pub batch_var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(features),
            shift: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            eps: 1e-5,
            momentum: 0.9,
        }
    }

    /// Training-mode forward using the batch statistics.
    pub fn forward_train(&self, x: &Array2<f64>) -> (Array2<f64>, BnCache) {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let var = x.map_axis(Axis(0), |col| {
            let m = col.sum() / n;
            col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
        });
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut normalized = x.clone();
        for mut row in normalized.rows_mut() {
            row.zip_mut_with(&mean, |v, &m| *v -= m);
            row.zip_mut_with(&inv_std, |v, &s| *v *= s);
        }
        let mut out = normalized.clone();
        for mut row in out.rows_mut() {
            row.zip_mut_with(&self.gamma, |v, &g| *v *= g);
            row.zip_mut_with(&self.shift, |v, &b| *v += b);
        }
        (
            out,
            BnCache {
                normalized,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        )
    }

    /// Inference-mode forward using the running statistics.
    pub fn forward_eval(&self, x: &Array2<f64>) -> Array2<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            row.zip_mut_with(&self.running_mean, |v, &m| *v -= m);
            row.zip_mut_with(&inv_std, |v, &s| *v *= s);
            row.zip_mut_with(&self.gamma, |v, &g| *v *= g);
            row.zip_mut_with(&self.shift, |v, &b| *v += b);
        }
        out
    }

    /// Exponential-moving-average update of the running statistics.
    pub fn update_running(&mut self, cache: &BnCache) {
        let m = self.momentum;
        self.running_mean
            .zip_mut_with(&cache.batch_mean, |r, &b| *r = m * *r + (1.0 - m) * b);
        self.running_var
            .zip_mut_with(&cache.batch_var, |r, &b| *r = m * *r + (1.0 - m) * b);
    }

    /// Backward pass: upstream gradient w.r.t. the BN output becomes
    /// gradients w.r.t. the BN input and the learnable parameters.
    pub fn backward(
        &self,
        cache: &BnCache,
        upstream: &Array2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let n = upstream.nrows() as f64;
        let d_gamma = (upstream * &cache.normalized).sum_axis(Axis(0));
        let d_shift = upstream.sum_axis(Axis(0));

        // d_norm = upstream * gamma, broadcast over rows.
        let mut d_norm = upstream.clone();
        for mut row in d_norm.rows_mut() {
            row.zip_mut_with(&self.gamma, |v, &g| *v *= g);
        }
        let sum_d_norm = d_norm.sum_axis(Axis(0));
        let sum_d_norm_x = (&d_norm * &cache.normalized).sum_axis(Axis(0));

        // dx = inv_std / n * (n * d_norm - Σ d_norm - x̂ * Σ d_norm x̂)
        let mut d_input = d_norm;
        for (mut row, norm_row) in d_input.rows_mut().into_iter().zip(cache.normalized.rows()) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = cache.inv_std[j] / n
                    * (n * *v - sum_d_norm[j] - norm_row[j] * sum_d_norm_x[j]);
            }
        }
        (d_input, d_gamma, d_shift)
    }
}
