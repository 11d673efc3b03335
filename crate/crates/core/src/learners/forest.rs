//! Bagged ensemble of decision trees.
//!
//! Trees are grown with the gini criterion and `min_samples_split = 2`;
//! with one estimator and bootstrap disabled the forest degenerates to a
//! plain decision tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logreg::argmax;
use super::tree::{Criterion, TreeModel, TreeParams};
use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    class_count: usize,
}

pub fn fit(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    n_estimators: usize,
    max_depth: usize,
    bootstrap: bool,
    seed: u64,
) -> ForestModel {
    let params = TreeParams {
        criterion: Criterion::Gini,
        max_depth,
        min_samples_split: 2,
    };
    let n = x.n_rows();
    let trees = (0..n_estimators)
        .map(|t| {
            if bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    seed.wrapping_add((t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                );
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let xs = x.select_rows(&rows);
                let ys: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
                super::tree::fit(&xs, &ys, class_count, &params)
            } else {
                super::tree::fit(x, y, class_count, &params)
            }
        })
        .collect();
    ForestModel { trees, class_count }
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                let mut votes = vec![0.0; self.class_count];
                for tree in &self.trees {
                    votes[tree.predict_row(row)] += 1.0;
                }
                argmax(&votes)
            })
            .collect()
    }
}
