//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::logreg::argmax;
use super::Matrix;
use crate::error::PipelineFailure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    /// Per-class prior probability; zero for classes absent from training.
    priors: Vec<f64>,
    /// Per-class, per-feature means.
    means: Vec<Vec<f64>>,
    /// Per-class, per-feature variances after smoothing.
    variances: Vec<Vec<f64>>,
    class_count: usize,
}

pub fn fit(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    var_smoothing: f64,
) -> Result<GnbModel, PipelineFailure> {
    let n = x.n_rows();
    let d = x.n_cols();

    // Smoothing scale: largest per-feature variance over the whole set.
    let mut global_mean = vec![0.0; d];
    for i in 0..n {
        for (j, gm) in global_mean.iter_mut().enumerate() {
            *gm += x.get(i, j);
        }
    }
    for gm in global_mean.iter_mut() {
        *gm /= n as f64;
    }
    let mut max_var = 0.0f64;
    for (j, &gm) in global_mean.iter().enumerate() {
        let var = (0..n).map(|i| (x.get(i, j) - gm).powi(2)).sum::<f64>() / n as f64;
        max_var = max_var.max(var);
    }
    let epsilon = var_smoothing * max_var;

    let mut priors = vec![0.0; class_count];
    let mut means = vec![vec![0.0; d]; class_count];
    let mut variances = vec![vec![0.0; d]; class_count];
    let mut counts = vec![0usize; class_count];
    for (i, &label) in y.iter().enumerate() {
        counts[label] += 1;
        for (j, m) in means[label].iter_mut().enumerate() {
            *m += x.get(i, j);
        }
    }
    for c in 0..class_count {
        if counts[c] == 0 {
            continue;
        }
        priors[c] = counts[c] as f64 / n as f64;
        for m in means[c].iter_mut() {
            *m /= counts[c] as f64;
        }
    }
    for (i, &label) in y.iter().enumerate() {
        for (j, v) in variances[label].iter_mut().enumerate() {
            let diff = x.get(i, j) - means[label][j];
            *v += diff * diff;
        }
    }
    for c in 0..class_count {
        if counts[c] == 0 {
            continue;
        }
        for v in variances[c].iter_mut() {
            *v = (*v / counts[c] as f64 + epsilon).max(1e-12);
        }
    }

    let model = GnbModel {
        priors,
        means,
        variances,
        class_count,
    };
    if model.means.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PipelineFailure::new("gnb statistics are non-finite"));
    }
    Ok(model)
}

impl GnbModel {
    fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        (0..self.class_count)
            .map(|c| {
                if self.priors[c] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut ll = self.priors[c].ln();
                for (j, &v) in row.iter().enumerate() {
                    let var = self.variances[c][j];
                    let diff = v - self.means[c][j];
                    ll += -0.5 * ((std::f64::consts::TAU * var).ln() + diff * diff / var);
                }
                ll
            })
            .collect()
    }

    /// Class posterior probabilities; each row sums to 1.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.n_rows())
            .map(|i| {
                let ll = self.joint_log_likelihood(x.row(i));
                let max = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = ll.iter().map(|&v| (v - max).exp()).collect();
                let sum: f64 = exps.iter().sum();
                exps.iter().map(|&e| e / sum).collect()
            })
            .collect()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.n_rows())
            .map(|i| argmax(&self.joint_log_likelihood(x.row(i))))
            .collect()
    }
}
