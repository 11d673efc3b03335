//! CART-style decision tree classifier.
//!
//! Splits scan every feature and every midpoint between consecutive distinct
//! values; the first strictly best (feature, threshold) wins, which keeps
//! fits deterministic.

use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    pub fn parse(name: &str) -> Criterion {
        match name {
            "entropy" => Criterion::Entropy,
            _ => Criterion::Gini,
        }
    }

    fn impurity(&self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => {
                1.0 - counts
                    .iter()
                    .map(|&c| {
                        let p = c as f64 / total as f64;
                        p * p
                    })
                    .sum::<f64>()
            }
            Criterion::Entropy => counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / total as f64;
                    -p * p.log2()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    root: Node,
    class_count: usize,
}

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

fn class_counts(y: &[usize], rows: &[usize], class_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; class_count];
    for &r in rows {
        counts[y[r]] += 1;
    }
    counts
}

/// Majority class; ties resolve to the lowest class index.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &count) in counts.iter().enumerate().skip(1) {
        if count > counts[best] {
            best = c;
        }
    }
    best
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    class_count: usize,
    criterion: Criterion,
) -> Option<SplitChoice> {
    let n = rows.len();
    let parent_counts = class_counts(y, rows, class_count);
    let parent_impurity = criterion.impurity(&parent_counts, n);
    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)

    for feature in 0..x.n_cols() {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| {
            x.get(a, feature)
                .partial_cmp(&x.get(b, feature))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut left_counts = vec![0usize; class_count];
        let mut right_counts = parent_counts.clone();
        for i in 0..n - 1 {
            let r = order[i];
            left_counts[y[r]] += 1;
            right_counts[y[r]] -= 1;
            let v = x.get(r, feature);
            let next = x.get(order[i + 1], feature);
            if next <= v {
                continue;
            }
            let threshold = v + (next - v) / 2.0;
            let n_left = i + 1;
            let n_right = n - n_left;
            let decrease = parent_impurity
                - (n_left as f64 / n as f64) * criterion.impurity(&left_counts, n_left)
                - (n_right as f64 / n as f64) * criterion.impurity(&right_counts, n_right);
            // Zero-gain splits are admissible (both sides are non-empty, so
            // recursion still terminates); the first best candidate wins.
            if best.is_none_or(|(d, _, _)| decrease > d) {
                best = Some((decrease, feature, threshold));
            }
        }
    }

    best.map(|(_, feature, threshold)| {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &r in rows {
            if x.get(r, feature) <= threshold {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        SplitChoice {
            feature,
            threshold,
            left,
            right,
        }
    })
}

fn grow(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    class_count: usize,
    params: &TreeParams,
    depth: usize,
) -> Node {
    let counts = class_counts(y, rows, class_count);
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if pure || depth >= params.max_depth || rows.len() < params.min_samples_split {
        return Node::Leaf {
            class: majority(&counts),
        };
    }
    match best_split(x, y, rows, class_count, params.criterion) {
        Some(split) => Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(grow(x, y, &split.left, class_count, params, depth + 1)),
            right: Box::new(grow(x, y, &split.right, class_count, params, depth + 1)),
        },
        None => Node::Leaf {
            class: majority(&counts),
        },
    }
}

pub fn fit(x: &Matrix, y: &[usize], class_count: usize, params: &TreeParams) -> TreeModel {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    TreeModel {
        root: grow(x, y, &rows, class_count, params, 0),
        class_count,
    }
}

impl TreeModel {
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        (0..x.n_rows())
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &Node) -> usize {
            match node {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}
