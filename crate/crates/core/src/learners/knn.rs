//! K-nearest-neighbors with uniform or inverse-distance vote weights.

use serde::{Deserialize, Serialize};

use super::logreg::argmax;
use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    x: Matrix,
    y: Vec<usize>,
    /// Effective neighbor count after clamping to the training size.
    k: usize,
    distance_weighted: bool,
    class_count: usize,
}

pub fn fit(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    k: usize,
    distance_weighted: bool,
) -> KnnModel {
    KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k: k.min(x.n_rows()).max(1),
        distance_weighted,
        class_count,
    }
}

impl KnnModel {
    pub fn effective_k(&self) -> usize {
        self.k
    }

    fn predict_row(&self, row: &[f64]) -> usize {
        let mut dists: Vec<(f64, usize)> = (0..self.x.n_rows())
            .map(|i| {
                let d2: f64 = self
                    .x
                    .row(i)
                    .iter()
                    .zip(row)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        // Sort by (distance, train index) so equidistant neighbors resolve
        // deterministically.
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = vec![0.0; self.class_count];
        for &(d2, i) in dists.iter().take(self.k) {
            let weight = if self.distance_weighted {
                1.0 / (d2.sqrt() + 1e-12)
            } else {
                1.0
            };
            votes[self.y[i]] += weight;
        }
        argmax(&votes)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nn_predicts_its_own_training_points() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 3) as f64]).collect();
        let y: Vec<usize> = (0..20).map(|i| i % 4).collect();
        let x = Matrix::from_rows(&rows);
        let model = fit(&x, &y, 4, 1, false);
        assert_eq!(model.predict(&x), y);
    }

    #[test]
    fn k_clamped_to_training_size() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let model = fit(&x, &[0, 1, 0], 2, 25, false);
        assert_eq!(model.effective_k(), 3);
        assert_eq!(model.predict(&x).len(), 3);
    }

    #[test]
    fn distance_weighting_prefers_the_close_point() {
        // Two faraway class-1 points against one touching class-0 point.
        let x = Matrix::from_rows(&[vec![0.0], vec![10.0], vec![10.1]]);
        let y = vec![0, 1, 1];
        let model = fit(&x, &y, 2, 3, true);
        let probe = Matrix::from_rows(&[vec![0.1]]);
        assert_eq!(model.predict(&probe), vec![0]);
        // Uniform voting flips the call.
        let uniform = fit(&x, &y, 2, 3, false);
        assert_eq!(uniform.predict(&probe), vec![1]);
    }
}
