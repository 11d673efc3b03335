//! Multiclass Matthews correlation, the fitness mapping and data-usage
//! accounting.

use serde::{Deserialize, Serialize};

use crate::pipeline::Genome;

/// K x K confusion counts; entry `(i, j)` counts rows of true class `i`
/// predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_count: usize,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            counts: vec![vec![0; class_count]; class_count],
            class_count,
        }
    }

    pub fn from_labels(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Self {
        assert_eq!(
            y_true.len(),
            y_pred.len(),
            "label vectors must match in length"
        );
        let mut cm = Self::new(class_count);
        for (&t, &p) in y_true.iter().zip(y_pred) {
            cm.counts[t][p] += 1;
        }
        cm
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn get(&self, true_class: usize, pred_class: usize) -> u64 {
        self.counts[true_class][pred_class]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.trace() as f64 / total as f64
    }
}

/// Multiclass Matthews correlation coefficient in `[-1, 1]`.
///
/// Uses the full confusion matrix: `(c*s - sum_k p_k t_k)` over
/// `sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))` where `c` is the trace, `s`
/// the total, `p_k` column sums and `t_k` row sums. A zero denominator
/// yields 0.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let k = cm.class_count();
    let s = cm.total() as f64;
    if s < 1.0 {
        return 0.0;
    }
    let c = cm.trace() as f64;
    let mut col_sums = vec![0.0f64; k];
    let mut row_sums = vec![0.0f64; k];
    for (i, row_sum) in row_sums.iter_mut().enumerate() {
        for (j, col_sum) in col_sums.iter_mut().enumerate() {
            let v = cm.get(i, j) as f64;
            *row_sum += v;
            *col_sum += v;
        }
    }
    let pt: f64 = (0..k).map(|i| col_sums[i] * row_sums[i]).sum();
    let p2: f64 = col_sums.iter().map(|p| p * p).sum();
    let t2: f64 = row_sums.iter().map(|t| t * t).sum();
    let denom = ((s * s - p2) * (s * s - t2)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (c * s - pt) / denom
}

/// Map MCC in `[-1, 1]` onto the search fitness in `[0, 1]`, zero best.
pub fn fitness_from_mcc(mcc_val: f64) -> f64 {
    assert!(
        (-1.0 - 1e-9..=1.0 + 1e-9).contains(&mcc_val),
        "mcc {mcc_val} outside [-1, 1]"
    );
    ((1.0 - mcc_val) / 2.0).clamp(0.0, 1.0)
}

/// Fraction of the data a genome trains on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsageReport {
    pub pct_instances: f64,
    pub pct_features: f64,
    pub pct_data: f64,
}

/// Data usage of a genome relative to the stated denominators. An absent
/// gene counts as using everything.
pub fn data_usage(genome: &Genome, max_instances: usize, max_features: usize) -> UsageReport {
    let pct_instances = match &genome.is_gene {
        Some(idx) => idx.len() as f64 / max_instances as f64,
        None => 1.0,
    };
    let pct_features = match &genome.fs_gene {
        Some(idx) => idx.len() as f64 / max_features as f64,
        None => 1.0,
    };
    UsageReport {
        pct_instances,
        pct_features,
        pct_data: pct_instances * pct_features,
    }
}

/// Which data-reduction genes a genome carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrMode {
    None,
    IsOnly,
    FsOnly,
    IsFs,
}

impl DrMode {
    pub const ALL: [DrMode; 4] = [DrMode::None, DrMode::IsOnly, DrMode::FsOnly, DrMode::IsFs];

    pub fn label(&self) -> &'static str {
        match self {
            DrMode::None => "none",
            DrMode::IsOnly => "is-only",
            DrMode::FsOnly => "fs-only",
            DrMode::IsFs => "is+fs",
        }
    }
}

pub fn dr_mode(genome: &Genome) -> DrMode {
    match (genome.is_gene.is_some(), genome.fs_gene.is_some()) {
        (false, false) => DrMode::None,
        (true, false) => DrMode::IsOnly,
        (false, true) => DrMode::FsOnly,
        (true, true) => DrMode::IsFs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::StepId;
    use crate::pipeline::{ConfiguredStep, Genome};
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: the Pearson correlation between the one-hot
    /// indicator matrices of the true and predicted labels (per-class
    /// centered covariances summed over classes). Works directly on the
    /// label vectors; never touches the confusion matrix path.
    pub(crate) fn mcc_indicator_oracle(y_true: &[usize], y_pred: &[usize], k: usize) -> f64 {
        let n = y_true.len();
        if n == 0 {
            return 0.0;
        }
        let indicator = |labels: &[usize], cls: usize| -> Vec<f64> {
            labels
                .iter()
                .map(|&l| if l == cls { 1.0 } else { 0.0 })
                .collect()
        };
        let mut cov_xy = 0.0;
        let mut var_x = 0.0;
        let mut var_y = 0.0;
        for cls in 0..k {
            let x = indicator(y_true, cls);
            let y = indicator(y_pred, cls);
            let mx = x.iter().sum::<f64>() / n as f64;
            let my = y.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                cov_xy += (x[i] - mx) * (y[i] - my);
                var_x += (x[i] - mx) * (x[i] - mx);
                var_y += (y[i] - my) * (y[i] - my);
            }
        }
        let denom = (var_x * var_y).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            cov_xy / denom
        }
    }

    fn diag(k: usize, count: u64) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(k);
        for i in 0..k {
            cm.counts[i][i] = count;
        }
        cm
    }

    #[test]
    fn perfect_prediction_is_one() {
        assert_eq!(mcc(&diag(3, 10)), 1.0);
    }

    #[test]
    fn binary_symmetric_is_zero() {
        let cm = ConfusionMatrix {
            counts: vec![vec![1, 1], vec![1, 1]],
            class_count: 2,
        };
        assert_eq!(mcc(&cm), 0.0);
    }

    #[test]
    fn binary_hand_computed_value() {
        // true=1 rows: TP=3 FN=2; true=0 rows: TN=4 FP=1 -> 10/sqrt(600)
        let cm = ConfusionMatrix {
            counts: vec![vec![4, 1], vec![2, 3]],
            class_count: 2,
        };
        let expected = 10.0 / 600.0_f64.sqrt();
        assert!((mcc(&cm) - expected).abs() < 1e-12);
        assert!((expected - 0.408_248_290_463_863).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_guard() {
        // Everything predicted as class 0: a column sum equals the total.
        let cm = ConfusionMatrix {
            counts: vec![vec![5, 0], vec![5, 0]],
            class_count: 2,
        };
        assert_eq!(mcc(&cm), 0.0);
        assert_eq!(mcc(&ConfusionMatrix::new(2)), 0.0);
    }

    #[test]
    fn matches_indicator_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let k = *[2usize, 3, 5].choose(&mut rng).unwrap();
            let n = rng.random_range(1..=50);
            let y_true: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let y_pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let cm = ConfusionMatrix::from_labels(&y_true, &y_pred, k);
            let got = mcc(&cm);
            let want = mcc_indicator_oracle(&y_true, &y_pred, k);
            assert!((got - want).abs() < 1e-12, "mcc {got} vs oracle {want}");
        }
    }

    #[test]
    fn fitness_mapping_endpoints() {
        assert_eq!(fitness_from_mcc(1.0), 0.0);
        assert_eq!(fitness_from_mcc(-1.0), 1.0);
        assert_eq!(fitness_from_mcc(0.0), 0.5);
    }

    #[test]
    #[should_panic]
    fn fitness_rejects_out_of_range() {
        fitness_from_mcc(1.5);
    }

    fn genome(is: Option<Vec<usize>>, fs: Option<Vec<usize>>) -> Genome {
        Genome {
            is_gene: is,
            fs_gene: fs,
            prep_genes: vec![],
            model_gene: ConfiguredStep {
                step_id: StepId::Model,
                method: "gnb".into(),
                params: Default::default(),
            },
        }
    }

    #[test]
    fn usage_identity_when_genes_absent() {
        let u = data_usage(&genome(None, None), 100, 10);
        assert_eq!(
            (u.pct_instances, u.pct_features, u.pct_data),
            (1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn usage_product_relation() {
        // 43% instances x 84% features = ~0.36 of the data, inside a
        // 0.35 +/- 0.06 band.
        let is: Vec<usize> = (0..43).collect();
        let fs: Vec<usize> = (0..84).collect();
        let u = data_usage(&genome(Some(is), Some(fs)), 100, 100);
        assert!((u.pct_data - u.pct_instances * u.pct_features).abs() < 1e-12);
        assert!((u.pct_data - 0.3612).abs() < 1e-12);
        assert!((0.3612f64 - 0.35).abs() <= 0.06);

        let is: Vec<usize> = (0..60).collect();
        let fs: Vec<usize> = (0..98).collect();
        let u = data_usage(&genome(Some(is), Some(fs)), 100, 100);
        assert!((u.pct_data - 0.588).abs() < 1e-12);
        assert!((0.588f64 - 0.59).abs() <= 0.05);
    }

    #[test]
    fn dr_mode_classification() {
        assert_eq!(dr_mode(&genome(None, None)), DrMode::None);
        assert_eq!(dr_mode(&genome(Some(vec![0]), None)), DrMode::IsOnly);
        assert_eq!(dr_mode(&genome(None, Some(vec![0]))), DrMode::FsOnly);
        assert_eq!(dr_mode(&genome(Some(vec![0]), Some(vec![0]))), DrMode::IsFs);
    }

    proptest! {
        #[test]
        fn mcc_invariant_under_class_relabeling(
            labels in proptest::collection::vec((0usize..4, 0usize..4), 1..60),
            perm_seed in 0u64..1000,
        ) {
            let k = 4;
            let y_true: Vec<usize> = labels.iter().map(|&(t, _)| t).collect();
            let y_pred: Vec<usize> = labels.iter().map(|&(_, p)| p).collect();
            let mut perm: Vec<usize> = (0..k).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let before = mcc(&ConfusionMatrix::from_labels(&y_true, &y_pred, k));
            let yt: Vec<usize> = y_true.iter().map(|&t| perm[t]).collect();
            let yp: Vec<usize> = y_pred.iter().map(|&p| perm[p]).collect();
            let after = mcc(&ConfusionMatrix::from_labels(&yt, &yp, k));
            prop_assert!((before - after).abs() < 1e-12);
        }

        #[test]
        fn fitness_always_in_unit_interval(
            labels in proptest::collection::vec((0usize..3, 0usize..3), 1..40),
        ) {
            let y_true: Vec<usize> = labels.iter().map(|&(t, _)| t).collect();
            let y_pred: Vec<usize> = labels.iter().map(|&(_, p)| p).collect();
            let f = fitness_from_mcc(mcc(&ConfusionMatrix::from_labels(&y_true, &y_pred, 3)));
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
