//! Multinomial logistic regression trained with fixed-epoch batch gradient
//! descent.

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::PipelineFailure;

/// Softmax classifier weights: one row of `n_features + 1` values per class,
/// the last entry being the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    weights: Vec<f64>,
    class_count: usize,
    n_features: usize,
}

fn scores_for_row(w: &[f64], row: &[f64], k: usize) -> Vec<f64> {
    let stride = row.len() + 1;
    (0..k)
        .map(|c| {
            let wc = &w[c * stride..(c + 1) * stride];
            let mut z = wc[row.len()];
            for (j, &x) in row.iter().enumerate() {
                z += wc[j] * x;
            }
            z
        })
        .collect()
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean cross-entropy loss with L2 penalty (biases excluded) and its
/// gradient with respect to the flattened weights.
pub fn softmax_loss_grad(
    w: &[f64],
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = x.n_rows();
    let d = x.n_cols();
    let stride = d + 1;
    assert_eq!(w.len(), class_count * stride);
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = x.row(i);
        let mut p = scores_for_row(w, row, class_count);
        softmax_in_place(&mut p);
        loss -= p[label].max(1e-300).ln();
        for (c, &pc) in p.iter().enumerate() {
            let err = pc - if c == label { 1.0 } else { 0.0 };
            let gc = &mut grad[c * stride..(c + 1) * stride];
            for (j, &xj) in row.iter().enumerate() {
                gc[j] += err * xj;
            }
            gc[d] += err;
        }
    }
    loss /= n as f64;
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    // L2 on weights only, not biases.
    for c in 0..class_count {
        for j in 0..d {
            let idx = c * stride + j;
            loss += 0.5 * l2 * w[idx] * w[idx];
            grad[idx] += l2 * w[idx];
        }
    }
    (loss, grad)
}

pub fn fit(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    learning_rate: f64,
    l2: f64,
    epochs: usize,
) -> Result<LogRegModel, PipelineFailure> {
    let d = x.n_cols();
    let mut w = vec![0.0; class_count * (d + 1)];
    for _ in 0..epochs {
        let (loss, grad) = softmax_loss_grad(&w, x, y, class_count, l2);
        if !loss.is_finite() {
            return Err(PipelineFailure::new("logreg loss diverged"));
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= learning_rate * gi;
        }
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(PipelineFailure::new("logreg weights diverged"));
    }
    Ok(LogRegModel {
        weights: w,
        class_count,
        n_features: d,
    })
}

impl LogRegModel {
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.n_rows())
            .map(|i| {
                let scores = scores_for_row(&self.weights, x.row(i), self.class_count);
                argmax(&scores)
            })
            .collect()
    }
}

/// Index of the maximum; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
