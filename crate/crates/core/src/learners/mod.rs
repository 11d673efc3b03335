//! Built-in classification models with declared hyperparameter spaces.
//!
//! Every model trains on a dense numeric matrix with labels in
//! `[0, class_count)` and predicts deterministically given its fitted
//! parameters. Fits with the same gene, data and seed are bitwise
//! reproducible.

mod forest;
mod gnb;
mod knn;
mod logreg;
mod tree;

pub use forest::ForestModel;
pub use gnb::GnbModel;
pub use knn::KnnModel;
pub use logreg::{softmax_loss_grad, LogRegModel};
pub use tree::{Criterion, TreeModel, TreeParams};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PipelineFailure;
use crate::pipeline::ConfiguredStep;
use crate::space::{ParamSpace, StepOption};

/// Dense row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n, d);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), d, "ragged matrix rows");
            m.data[i * d..(i + 1) * d].copy_from_slice(row);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copy of the matrix restricted to the given row indices.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(self.row(r));
        }
        out
    }
}

/// A trained classification model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_id", rename_all = "snake_case")]
pub enum FittedModel {
    Logreg(LogRegModel),
    Gnb(GnbModel),
    Knn(KnnModel),
    Dtree(TreeModel),
    Rforest(ForestModel),
}

impl FittedModel {
    pub fn model_id(&self) -> &'static str {
        match self {
            FittedModel::Logreg(_) => "logreg",
            FittedModel::Gnb(_) => "gnb",
            FittedModel::Knn(_) => "knn",
            FittedModel::Dtree(_) => "dtree",
            FittedModel::Rforest(_) => "rforest",
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        match self {
            FittedModel::Logreg(m) => m.predict(x),
            FittedModel::Gnb(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::Dtree(m) => m.predict(x),
            FittedModel::Rforest(m) => m.predict(x),
        }
    }
}

fn require_valid_training_set(
    x: &Matrix,
    y: &[usize],
    class_count: usize,
) -> Result<(), PipelineFailure> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(PipelineFailure::new("empty training matrix"));
    }
    if x.n_rows() != y.len() {
        return Err(PipelineFailure::new("matrix and label length mismatch"));
    }
    if !x.is_finite() {
        return Err(PipelineFailure::new("non-finite feature values"));
    }
    if y.iter().any(|&l| l >= class_count) {
        return Err(PipelineFailure::new("label out of range"));
    }
    let mut seen = vec![false; class_count];
    for &l in y {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(PipelineFailure::new(
            "training labels carry fewer than 2 classes",
        ));
    }
    Ok(())
}

fn int_param(gene: &ConfiguredStep, name: &str, default: i64) -> i64 {
    gene.params
        .get(name)
        .and_then(|v| v.as_i64())
        .unwrap_or(default)
}

fn float_param(gene: &ConfiguredStep, name: &str, default: f64) -> f64 {
    gene.params
        .get(name)
        .and_then(|v| v.as_f64())
        .unwrap_or(default)
}

fn str_param<'a>(gene: &'a ConfiguredStep, name: &str, default: &'a str) -> &'a str {
    gene.params
        .get(name)
        .and_then(|v| v.as_str())
        .unwrap_or(default)
}

/// Train the model a gene describes. `seed` drives the stochastic parts
/// (bootstrap sampling); everything else is deterministic.
pub fn fit_model(
    gene: &ConfiguredStep,
    x: &Matrix,
    y: &[usize],
    class_count: usize,
    seed: u64,
) -> Result<FittedModel, PipelineFailure> {
    require_valid_training_set(x, y, class_count)?;
    match gene.method.as_str() {
        "logreg" => {
            let lr = float_param(gene, "learning_rate", 0.1);
            let l2 = float_param(gene, "l2", 1e-4);
            let epochs = int_param(gene, "epochs", 200).max(1) as usize;
            logreg::fit(x, y, class_count, lr, l2, epochs).map(FittedModel::Logreg)
        }
        "gnb" => {
            let smoothing = float_param(gene, "var_smoothing", 1e-9);
            gnb::fit(x, y, class_count, smoothing).map(FittedModel::Gnb)
        }
        "knn" => {
            // k larger than the training set is clamped; the effective value
            // is recorded on the fitted model.
            let k = int_param(gene, "k", 5).max(1) as usize;
            let weighted = str_param(gene, "weights", "uniform") == "distance";
            Ok(FittedModel::Knn(knn::fit(x, y, class_count, k, weighted)))
        }
        "dtree" => {
            let params = TreeParams {
                criterion: Criterion::parse(str_param(gene, "criterion", "gini")),
                max_depth: int_param(gene, "max_depth", 10).max(1) as usize,
                min_samples_split: int_param(gene, "min_samples_split", 2).max(2) as usize,
            };
            Ok(FittedModel::Dtree(tree::fit(x, y, class_count, &params)))
        }
        "rforest" => {
            let n_estimators = int_param(gene, "n_estimators", 50).max(1) as usize;
            let max_depth = int_param(gene, "max_depth", 10).max(1) as usize;
            let bootstrap = str_param(gene, "bootstrap", "true") == "true";
            Ok(FittedModel::Rforest(forest::fit(
                x,
                y,
                class_count,
                n_estimators,
                max_depth,
                bootstrap,
                seed,
            )))
        }
        other => Err(PipelineFailure::new(format!("unknown model {other:?}"))),
    }
}

/// The default model option space.
pub fn default_model_space() -> Vec<StepOption> {
    vec![
        StepOption::new("logreg")
            .with_param(
                "learning_rate",
                ParamSpace::FloatRange {
                    lo: 1e-4,
                    hi: 1.0,
                    log: true,
                },
            )
            .with_param(
                "l2",
                ParamSpace::FloatRange {
                    lo: 1e-6,
                    hi: 10.0,
                    log: true,
                },
            )
            .with_param("epochs", ParamSpace::IntRange { lo: 50, hi: 500 }),
        StepOption::new("gnb").with_param(
            "var_smoothing",
            ParamSpace::FloatRange {
                lo: 1e-12,
                hi: 1e-6,
                log: true,
            },
        ),
        StepOption::new("knn")
            .with_param("k", ParamSpace::IntRange { lo: 1, hi: 25 })
            .with_param(
                "weights",
                ParamSpace::Choice {
                    options: vec!["uniform".into(), "distance".into()],
                },
            ),
        StepOption::new("dtree")
            .with_param(
                "criterion",
                ParamSpace::Choice {
                    options: vec!["gini".into(), "entropy".into()],
                },
            )
            .with_param("max_depth", ParamSpace::IntRange { lo: 2, hi: 20 })
            .with_param("min_samples_split", ParamSpace::IntRange { lo: 2, hi: 20 }),
        StepOption::new("rforest")
            .with_param("n_estimators", ParamSpace::IntRange { lo: 10, hi: 100 })
            .with_param("max_depth", ParamSpace::IntRange { lo: 2, hi: 20 })
            .with_param(
                "bootstrap",
                ParamSpace::Choice {
                    options: vec!["true".into(), "false".into()],
                },
            ),
    ]
}

/// Draw a model gene uniformly over the model list, each hyperparameter
/// sampled from its declared space.
pub fn sample_model_gene<R: Rng + ?Sized>(space: &[StepOption], rng: &mut R) -> ConfiguredStep {
    assert!(!space.is_empty(), "empty model space");
    let option = &space[rng.random_range(0..space.len())];
    ConfiguredStep {
        step_id: crate::analyzer::StepId::Model,
        method: option.method.clone(),
        params: option.sample_params(rng),
    }
}
