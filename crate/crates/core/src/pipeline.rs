//! Realize a genome as an executable pipeline: apply the data-reduction
//! index sets, fit the preprocessing operators in blueprint order on the
//! reduced training data, train the model, and predict on raw rows.
//!
//! Preprocessing statistics are learned exclusively from the reduced
//! training data; prediction rows never influence any fitted state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analyzer::{Blueprint, ColumnLane, FeatureInfo, StepId};
use crate::dataset::{Cell, Dataset};
use crate::error::PipelineFailure;
use crate::learners::{fit_model, FittedModel, Matrix};
use crate::space::ParamValue;

/// One configured pipeline step: a chosen method plus hyperparameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfiguredStep {
    pub step_id: StepId,
    pub method: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

/// One candidate solution: optional instance/feature index sets, one
/// configured gene per blueprint preprocessing step, and a model gene.
///
/// Index sets are sorted, duplicate-free and within bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub is_gene: Option<Vec<usize>>,
    pub fs_gene: Option<Vec<usize>>,
    pub prep_genes: Vec<ConfiguredStep>,
    pub model_gene: ConfiguredStep,
}

/// Smallest admissible instance-selection gene for a blueprint.
pub fn min_is_size(blueprint: &Blueprint) -> usize {
    10usize
        .max(blueprint.class_count)
        .min(blueprint.max_instances)
}

fn sorted_unique_in_bounds(indices: &[usize], bound: usize) -> bool {
    indices.windows(2).all(|w| w[0] < w[1]) && indices.iter().all(|&i| i < bound)
}

/// Check every genome invariant against a blueprint. Returns a description
/// of the first violation, if any.
pub fn validate_genome(genome: &Genome, blueprint: &Blueprint) -> Result<(), String> {
    if let Some(is) = &genome.is_gene {
        if !sorted_unique_in_bounds(is, blueprint.max_instances) {
            return Err("is_gene not sorted/unique/in-bounds".into());
        }
        if is.len() < min_is_size(blueprint) {
            return Err(format!("is_gene size {} below minimum", is.len()));
        }
        let mut covered = vec![false; blueprint.class_count];
        for &i in is {
            covered[blueprint.instance_classes[i]] = true;
        }
        for cls in blueprint.present_classes() {
            if !covered[cls] {
                return Err(format!("is_gene misses class {cls}"));
            }
        }
    }
    if let Some(fs) = &genome.fs_gene {
        if !sorted_unique_in_bounds(fs, blueprint.max_features) {
            return Err("fs_gene not sorted/unique/in-bounds".into());
        }
        if fs.is_empty() {
            return Err("fs_gene empty".into());
        }
    }
    let prep_specs = blueprint.prep_steps();
    if genome.prep_genes.len() != prep_specs.len() {
        return Err("prep gene count does not match blueprint".into());
    }
    for (gene, spec) in genome.prep_genes.iter().zip(prep_specs) {
        if gene.step_id != spec.step_id {
            return Err(format!("prep gene order mismatch at {:?}", gene.step_id));
        }
        let option = spec
            .options
            .iter()
            .find(|o| o.method == gene.method)
            .ok_or_else(|| {
                format!(
                    "method {:?} not an option of {:?}",
                    gene.method, spec.step_id
                )
            })?;
        for (name, space) in &option.params {
            match gene.params.get(name) {
                Some(v) if space.contains(v) => {}
                _ => return Err(format!("param {name} missing or out of range")),
            }
        }
    }
    let model_spec = blueprint.model_step();
    let option = model_spec
        .options
        .iter()
        .find(|o| o.method == genome.model_gene.method)
        .ok_or_else(|| format!("unknown model {:?}", genome.model_gene.method))?;
    for (name, space) in &option.params {
        match genome.model_gene.params.get(name) {
            Some(v) if space.contains(v) => {}
            _ => return Err(format!("model param {name} missing or out of range")),
        }
    }
    Ok(())
}

/// Resolve the data-reduction genes: which training rows and which feature
/// names the pipeline actually trains on. Absent genes select everything.
pub fn apply_dr(
    genome: &Genome,
    train_rows: &[usize],
    feature_names: &[String],
) -> (Vec<usize>, Vec<String>) {
    let rows = match &genome.is_gene {
        Some(idx) => idx.iter().map(|&i| train_rows[i]).collect(),
        None => train_rows.to_vec(),
    };
    let features = match &genome.fs_gene {
        Some(idx) => idx.iter().map(|&i| feature_names[i].clone()).collect(),
        None => feature_names.to_vec(),
    };
    (rows, features)
}

// ---------------------------------------------------------------------------
// Working table: the mutable column store preprocessing operators act on.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ColData {
    Num(Vec<Option<f64>>),
    Cat(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkColumn {
    pub name: String,
    /// Only columns that were numerical at analysis time are scaled.
    pub scalable: bool,
    pub data: ColData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkTable {
    pub columns: Vec<WorkColumn>,
    pub n_rows: usize,
}

impl WorkTable {
    /// Assemble the table for the given rows and feature columns.
    pub fn build(
        ds: &Dataset,
        rows: &[usize],
        features: &[&FeatureInfo],
    ) -> Result<WorkTable, PipelineFailure> {
        let mut columns = Vec::with_capacity(features.len());
        for info in features {
            let col = ds.column(&info.name).ok_or_else(|| {
                PipelineFailure::new(format!("column {:?} absent from data", info.name))
            })?;
            let data = match info.lane() {
                ColumnLane::Dropped => continue,
                ColumnLane::Numeric | ColumnLane::NumericBinary => {
                    let mut values = Vec::with_capacity(rows.len());
                    for &r in rows {
                        values.push(match &col.cells[r] {
                            Cell::Number(v) => Some(*v),
                            Cell::Missing => None,
                            Cell::Text(_) => {
                                return Err(PipelineFailure::new(format!(
                                    "column {:?} expected numeric, found text",
                                    info.name
                                )))
                            }
                        });
                    }
                    ColData::Num(values)
                }
                ColumnLane::Categorical => {
                    ColData::Cat(rows.iter().map(|&r| col.cells[r].canonical()).collect())
                }
            };
            columns.push(WorkColumn {
                name: info.name.clone(),
                scalable: info.lane() == ColumnLane::Numeric,
                data,
            });
        }
        Ok(WorkTable {
            columns,
            n_rows: rows.len(),
        })
    }

    /// Flatten into a dense numeric matrix. Residual missing numeric cells
    /// (a column that had no missing values when the blueprint was derived)
    /// fall back to zero; residual categorical columns are a failure.
    pub fn to_matrix(&self) -> Result<Matrix, PipelineFailure> {
        let mut out = Matrix::zeros(self.n_rows, self.columns.len());
        for (j, col) in self.columns.iter().enumerate() {
            match &col.data {
                ColData::Num(values) => {
                    for (i, v) in values.iter().enumerate() {
                        out.set(i, j, v.unwrap_or(0.0));
                    }
                }
                ColData::Cat(_) => {
                    return Err(PipelineFailure::new(format!(
                        "column {:?} is still categorical at matrix build",
                        col.name
                    )))
                }
            }
        }
        if !out.is_finite() {
            return Err(PipelineFailure::new(
                "non-finite values after preprocessing",
            ));
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Fitted operator states.
// ---------------------------------------------------------------------------

/// Mapping of a two-valued numeric column onto {0, 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMap {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl BinaryMap {
    fn apply(&self, v: f64) -> f64 {
        match self.hi {
            Some(hi) => {
                // Unseen values snap to the nearer endpoint.
                if (v - self.lo).abs() <= (v - hi).abs() {
                    0.0
                } else {
                    1.0
                }
            }
            None => 0.0,
        }
    }
}

fn fit_binary_maps(
    table: &WorkTable,
    blueprint_lanes: &BTreeMap<String, ColumnLane>,
) -> BTreeMap<String, BinaryMap> {
    let mut maps = BTreeMap::new();
    for col in &table.columns {
        if blueprint_lanes.get(&col.name) != Some(&ColumnLane::NumericBinary) {
            continue;
        }
        if let ColData::Num(values) = &col.data {
            let mut seen: Vec<f64> = values.iter().flatten().copied().collect();
            seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
            seen.dedup();
            let map = match seen.as_slice() {
                [] => BinaryMap { lo: 0.0, hi: None },
                [only] => BinaryMap {
                    lo: *only,
                    hi: None,
                },
                [first, .., last] => BinaryMap {
                    lo: *first,
                    hi: Some(*last),
                },
            };
            maps.insert(col.name.clone(), map);
        }
    }
    maps
}

fn apply_binary_maps(table: &mut WorkTable, maps: &BTreeMap<String, BinaryMap>) {
    for col in table.columns.iter_mut() {
        if let (Some(map), ColData::Num(values)) = (maps.get(&col.name), &mut col.data) {
            for v in values.iter_mut().flatten() {
                *v = map.apply(*v);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub center: f64,
    pub scale: f64,
}

/// Learned statistics of one preprocessing step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepState {
    Drop,
    ImputeNum {
        fills: BTreeMap<String, f64>,
    },
    ImputeCat {
        fills: BTreeMap<String, String>,
    },
    OneHot {
        categories: BTreeMap<String, Vec<String>>,
    },
    Ordinal {
        categories: BTreeMap<String, Vec<String>>,
    },
    Scale {
        params: BTreeMap<String, ScaleParams>,
    },
}

/// A fitted preprocessing step: the configuration plus its learned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStep {
    pub step_id: StepId,
    pub method: String,
    pub hyperparameters: BTreeMap<String, ParamValue>,
    pub state: StepState,
}

fn non_missing(values: &[Option<f64>]) -> Vec<f64> {
    values.iter().flatten().copied().collect()
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sentinel category used by the constant categorical imputer and for
/// categories never seen at fit time.
pub const MISSING_SENTINEL: &str = "__missing__";

/// Learn a step's state from the current table.
pub fn fit_step(spec: &ConfiguredStep, table: &WorkTable) -> Result<StepState, PipelineFailure> {
    match spec.step_id {
        StepId::DropIdentifiers => Ok(StepState::Drop),
        StepId::ImputeNumerical => {
            let mut fills = BTreeMap::new();
            for col in &table.columns {
                if let ColData::Num(values) = &col.data {
                    let mut present = non_missing(values);
                    present.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let fill = match spec.method.as_str() {
                        "mean" => mean(&present),
                        "median" => quantile(&present, 0.5),
                        "constant" => 0.0,
                        other => {
                            return Err(PipelineFailure::new(format!(
                                "unknown numeric imputer {other:?}"
                            )))
                        }
                    };
                    fills.insert(col.name.clone(), fill);
                }
            }
            Ok(StepState::ImputeNum { fills })
        }
        StepId::ImputeCategorical => {
            let mut fills = BTreeMap::new();
            for col in &table.columns {
                if let ColData::Cat(values) = &col.data {
                    let fill = match spec.method.as_str() {
                        "most-frequent" => {
                            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                            for v in values.iter().flatten() {
                                *counts.entry(v.as_str()).or_default() += 1;
                            }
                            // Ties resolve to the lexicographically smallest
                            // value.
                            counts
                                .iter()
                                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                                .map(|(v, _)| v.to_string())
                                .unwrap_or_else(|| MISSING_SENTINEL.to_string())
                        }
                        "constant" => MISSING_SENTINEL.to_string(),
                        other => {
                            return Err(PipelineFailure::new(format!(
                                "unknown categorical imputer {other:?}"
                            )))
                        }
                    };
                    fills.insert(col.name.clone(), fill);
                }
            }
            Ok(StepState::ImputeCat { fills })
        }
        StepId::Encode => {
            let mut categories = BTreeMap::new();
            for col in &table.columns {
                if let ColData::Cat(values) = &col.data {
                    let mut cats: Vec<String> = values.iter().flatten().cloned().collect();
                    cats.sort();
                    cats.dedup();
                    categories.insert(col.name.clone(), cats);
                }
            }
            match spec.method.as_str() {
                "one-hot" => Ok(StepState::OneHot { categories }),
                "ordinal" => Ok(StepState::Ordinal { categories }),
                other => Err(PipelineFailure::new(format!("unknown encoder {other:?}"))),
            }
        }
        StepId::Scale => {
            let mut params = BTreeMap::new();
            for col in &table.columns {
                if !col.scalable {
                    continue;
                }
                if let ColData::Num(values) = &col.data {
                    let mut present = non_missing(values);
                    present.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let p = match spec.method.as_str() {
                        "standard" => {
                            let mu = mean(&present);
                            let var = mean(
                                &present
                                    .iter()
                                    .map(|v| (v - mu) * (v - mu))
                                    .collect::<Vec<_>>(),
                            );
                            ScaleParams {
                                center: mu,
                                scale: var.sqrt(),
                            }
                        }
                        "min-max" => {
                            let lo = present.first().copied().unwrap_or(0.0);
                            let hi = present.last().copied().unwrap_or(0.0);
                            ScaleParams {
                                center: lo,
                                scale: hi - lo,
                            }
                        }
                        "robust" => {
                            let med = quantile(&present, 0.5);
                            let iqr = quantile(&present, 0.75) - quantile(&present, 0.25);
                            ScaleParams {
                                center: med,
                                scale: iqr,
                            }
                        }
                        other => {
                            return Err(PipelineFailure::new(format!("unknown scaler {other:?}")))
                        }
                    };
                    params.insert(col.name.clone(), p);
                }
            }
            Ok(StepState::Scale { params })
        }
        StepId::Model => Err(PipelineFailure::new("model step has no operator state")),
    }
}

/// Apply a fitted step to the table. Deterministic given the state.
pub fn apply_step(state: &StepState, table: &mut WorkTable) -> Result<(), PipelineFailure> {
    match state {
        StepState::Drop => {}
        StepState::ImputeNum { fills } => {
            for col in table.columns.iter_mut() {
                if let (Some(fill), ColData::Num(values)) = (fills.get(&col.name), &mut col.data) {
                    for v in values.iter_mut() {
                        if v.is_none() {
                            *v = Some(*fill);
                        }
                    }
                }
            }
        }
        StepState::ImputeCat { fills } => {
            for col in table.columns.iter_mut() {
                if let (Some(fill), ColData::Cat(values)) = (fills.get(&col.name), &mut col.data) {
                    for v in values.iter_mut() {
                        if v.is_none() {
                            *v = Some(fill.clone());
                        }
                    }
                }
            }
        }
        StepState::OneHot { categories } => {
            let mut replaced = Vec::with_capacity(table.columns.len());
            for col in table.columns.drain(..) {
                match (categories.get(&col.name), &col.data) {
                    (Some(cats), ColData::Cat(values)) => {
                        // Values unseen at fit time (and residual missing)
                        // become the all-zeros block.
                        for cat in cats {
                            let indicator: Vec<Option<f64>> = values
                                .iter()
                                .map(|v| Some(f64::from(v.as_deref() == Some(cat.as_str()))))
                                .collect();
                            replaced.push(WorkColumn {
                                name: format!("{}={}", col.name, cat),
                                scalable: false,
                                data: ColData::Num(indicator),
                            });
                        }
                    }
                    _ => replaced.push(col),
                }
            }
            table.columns = replaced;
        }
        StepState::Ordinal { categories } => {
            for col in table.columns.iter_mut() {
                if let (Some(cats), ColData::Cat(values)) = (categories.get(&col.name), &col.data) {
                    let reserved = cats.len() as f64;
                    let encoded: Vec<Option<f64>> = values
                        .iter()
                        .map(|v| {
                            Some(match v {
                                Some(s) => cats
                                    .iter()
                                    .position(|c| c == s)
                                    .map_or(reserved, |i| i as f64),
                                None => reserved,
                            })
                        })
                        .collect();
                    col.data = ColData::Num(encoded);
                    col.scalable = false;
                }
            }
        }
        StepState::Scale { params } => {
            for col in table.columns.iter_mut() {
                if let (Some(p), ColData::Num(values)) = (params.get(&col.name), &mut col.data) {
                    for v in values.iter_mut().flatten() {
                        *v = if p.scale > 0.0 && p.scale.is_finite() {
                            (*v - p.center) / p.scale
                        } else {
                            // Zero-variance guard: constant features carry no
                            // signal and collapse to zero.
                            0.0
                        };
                    }
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Fitted pipeline.
// ---------------------------------------------------------------------------

/// Schema the pipeline was trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSchema {
    /// Feature columns surviving identifier removal, in order.
    pub features: Vec<FeatureInfo>,
    pub target_name: String,
    pub label_names: Vec<String>,
    pub class_count: usize,
}

/// A trained pipeline: fitted preprocessing states plus the fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub schema: PipelineSchema,
    /// Fraction of the provided training rows actually trained on.
    pub is_fraction: f64,
    /// Resolved feature names the pipeline consumes.
    pub fs_names: Vec<String>,
    pub binary_maps: BTreeMap<String, BinaryMap>,
    pub steps: Vec<FittedStep>,
    pub model_method: String,
    pub model_hyperparameters: BTreeMap<String, ParamValue>,
    pub model: FittedModel,
    /// (rows_used, features_used) on the reduced training data.
    pub training_dims: (usize, usize),
    pub model_seed: u64,
}

impl FittedPipeline {
    fn selected_features(&self) -> Result<Vec<&FeatureInfo>, PipelineFailure> {
        self.fs_names
            .iter()
            .map(|name| {
                self.schema
                    .features
                    .iter()
                    .find(|f| &f.name == name)
                    .ok_or_else(|| {
                        PipelineFailure::new(format!("feature {name:?} missing from schema"))
                    })
            })
            .collect()
    }

    /// Transform raw rows through the fitted preprocessing stack.
    pub fn transform(&self, ds: &Dataset, rows: &[usize]) -> Result<Matrix, PipelineFailure> {
        let features = self.selected_features()?;
        let mut table = WorkTable::build(ds, rows, &features)?;
        apply_binary_maps(&mut table, &self.binary_maps);
        for step in &self.steps {
            apply_step(&step.state, &mut table)?;
        }
        table.to_matrix()
    }

    /// Predict labels for every row of the dataset. Instance selection is
    /// never applied to prediction rows.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<usize>, PipelineFailure> {
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let x = self.transform(ds, &rows)?;
        Ok(self.model.predict(&x))
    }
}

/// Fit the pipeline a genome describes on the given training data.
///
/// Steps are fitted in blueprint order on the data-reduced rows; the model
/// trains last. Numerical trouble surfaces as a [`PipelineFailure`] value.
pub fn fit_pipeline(
    genome: &Genome,
    blueprint: &Blueprint,
    train: &Dataset,
    seed: u64,
) -> Result<FittedPipeline, PipelineFailure> {
    let usable: Vec<&FeatureInfo> = blueprint.usable_features();
    let usable_names: Vec<String> = usable.iter().map(|f| f.name.clone()).collect();
    let all_rows: Vec<usize> = (0..train.n_rows()).collect();

    if let Some(is) = &genome.is_gene {
        if is.iter().any(|&i| i >= train.n_rows()) {
            return Err(PipelineFailure::new("instance index out of range"));
        }
    }
    if let Some(fs) = &genome.fs_gene {
        if fs.iter().any(|&i| i >= usable_names.len()) {
            return Err(PipelineFailure::new("feature index out of range"));
        }
    }

    let (rows, fs_names) = apply_dr(genome, &all_rows, &usable_names);
    let features: Vec<&FeatureInfo> = fs_names
        .iter()
        .map(|name| {
            *usable
                .iter()
                .find(|f| &f.name == name)
                .expect("selected feature exists")
        })
        .collect();

    let lanes: BTreeMap<String, ColumnLane> =
        usable.iter().map(|f| (f.name.clone(), f.lane())).collect();

    let mut table = WorkTable::build(train, &rows, &features)?;
    let binary_maps = fit_binary_maps(&table, &lanes);
    apply_binary_maps(&mut table, &binary_maps);

    if genome.prep_genes.len() != blueprint.prep_steps().len() {
        return Err(PipelineFailure::new(
            "genome does not match blueprint steps",
        ));
    }
    let mut steps = Vec::with_capacity(genome.prep_genes.len());
    for gene in &genome.prep_genes {
        let state = fit_step(gene, &table)?;
        apply_step(&state, &mut table)?;
        steps.push(FittedStep {
            step_id: gene.step_id,
            method: gene.method.clone(),
            hyperparameters: gene.params.clone(),
            state,
        });
    }

    let x = table.to_matrix()?;
    let y: Vec<usize> = rows.iter().map(|&r| train.target[r]).collect();
    let model = fit_model(&genome.model_gene, &x, &y, train.class_count(), seed)?;

    Ok(FittedPipeline {
        schema: PipelineSchema {
            features: usable.into_iter().cloned().collect(),
            target_name: train.target_name.clone(),
            label_names: train.label_names.clone(),
            class_count: train.class_count(),
        },
        is_fraction: rows.len() as f64 / train.n_rows().max(1) as f64,
        fs_names,
        binary_maps,
        steps,
        model_method: genome.model_gene.method.clone(),
        model_hyperparameters: genome.model_gene.params.clone(),
        model,
        training_dims: (rows.len(), features.len()),
        model_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::analyze;
    use crate::dataset::{generate_synthetic, SynthSpec};
    use crate::metrics::{mcc, ConfusionMatrix};
    use crate::space::SearchSpaceConfig;
    use proptest::prelude::*;

    fn num_col(name: &str, values: &[Option<f64>]) -> WorkColumn {
        WorkColumn {
            name: name.into(),
            scalable: true,
            data: ColData::Num(values.to_vec()),
        }
    }

    fn cat_col(name: &str, values: &[Option<&str>]) -> WorkColumn {
        WorkColumn {
            name: name.into(),
            scalable: false,
            data: ColData::Cat(values.iter().map(|v| v.map(String::from)).collect()),
        }
    }

    fn step(step_id: StepId, method: &str) -> ConfiguredStep {
        ConfiguredStep {
            step_id,
            method: method.into(),
            params: BTreeMap::new(),
        }
    }

    fn table(columns: Vec<WorkColumn>) -> WorkTable {
        let n_rows = match &columns[0].data {
            ColData::Num(v) => v.len(),
            ColData::Cat(v) => v.len(),
        };
        WorkTable { columns, n_rows }
    }

    #[test]
    fn standard_scaler_hand_arithmetic() {
        let mut t = table(vec![num_col("x", &[Some(1.0), Some(2.0), Some(3.0)])]);
        let state = fit_step(&step(StepId::Scale, "standard"), &t).unwrap();
        if let StepState::Scale { params } = &state {
            let p = &params["x"];
            assert!((p.center - 2.0).abs() < 1e-12);
            assert!((p.scale - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        } else {
            panic!("wrong state");
        }
        apply_step(&state, &mut t).unwrap();
        let m = t.to_matrix().unwrap();
        assert!((m.get(0, 0) + 1.224_744_871_391_589).abs() < 1e-12);
        assert!(m.get(1, 0).abs() < 1e-12);
        assert!((m.get(2, 0) - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn min_max_zero_range_guard() {
        let mut t = table(vec![num_col("x", &[Some(5.0), Some(5.0)])]);
        let state = fit_step(&step(StepId::Scale, "min-max"), &t).unwrap();
        apply_step(&state, &mut t).unwrap();
        let m = t.to_matrix().unwrap();
        assert_eq!((m.get(0, 0), m.get(1, 0)), (0.0, 0.0));
    }

    #[test]
    fn robust_scaler_uses_median_and_iqr() {
        let mut t = table(vec![num_col(
            "x",
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
        )]);
        let state = fit_step(&step(StepId::Scale, "robust"), &t).unwrap();
        if let StepState::Scale { params } = &state {
            assert_eq!(params["x"].center, 3.0);
            assert_eq!(params["x"].scale, 2.0); // q75=4, q25=2
        } else {
            panic!("wrong state");
        }
        apply_step(&state, &mut t).unwrap();
        let m = t.to_matrix().unwrap();
        assert_eq!(m.get(0, 0), -1.0);
        assert_eq!(m.get(4, 0), 1.0);
    }

    #[test]
    fn median_imputer_even_count() {
        let mut t = table(vec![num_col("x", &[Some(1.0), None, Some(3.0)])]);
        let state = fit_step(&step(StepId::ImputeNumerical, "median"), &t).unwrap();
        apply_step(&state, &mut t).unwrap();
        let m = t.to_matrix().unwrap();
        assert_eq!(m.get(1, 0), 2.0);
    }

    #[test]
    fn most_frequent_imputer_tie_breaks_lexicographically() {
        let mut t = table(vec![cat_col(
            "c",
            &[Some("b"), Some("a"), None, Some("a"), Some("b")],
        )]);
        let state = fit_step(&step(StepId::ImputeCategorical, "most-frequent"), &t).unwrap();
        apply_step(&state, &mut t).unwrap();
        if let ColData::Cat(values) = &t.columns[0].data {
            assert_eq!(values[2].as_deref(), Some("a"));
        } else {
            panic!("wrong column type");
        }
    }

    #[test]
    fn one_hot_unseen_category_is_all_zeros() {
        let fit_table = table(vec![cat_col("c", &[Some("a"), Some("b"), Some("c")])]);
        let state = fit_step(&step(StepId::Encode, "one-hot"), &fit_table).unwrap();
        if let StepState::OneHot { categories } = &state {
            assert_eq!(categories["c"], vec!["a", "b", "c"]);
        } else {
            panic!("wrong state");
        }
        let mut apply_table = table(vec![cat_col("c", &[Some("b"), Some("zzz"), None])]);
        apply_step(&state, &mut apply_table).unwrap();
        let m = apply_table.to_matrix().unwrap();
        assert_eq!(m.n_cols(), 3);
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(m.row(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn ordinal_unseen_maps_to_reserved_index() {
        let fit_table = table(vec![cat_col("c", &[Some("x"), Some("y")])]);
        let state = fit_step(&step(StepId::Encode, "ordinal"), &fit_table).unwrap();
        let mut apply_table = table(vec![cat_col("c", &[Some("y"), Some("other")])]);
        apply_step(&state, &mut apply_table).unwrap();
        let m = apply_table.to_matrix().unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 0), 2.0);
    }

    #[test]
    fn apply_dr_identity_and_selection() {
        let names: Vec<String> = (0..6).map(|i| format!("f{i}")).collect();
        let rows: Vec<usize> = (0..6).collect();
        let gnome = Genome {
            is_gene: None,
            fs_gene: None,
            prep_genes: vec![],
            model_gene: step(StepId::Model, "gnb"),
        };
        let (r, f) = apply_dr(&gnome, &rows, &names);
        assert_eq!(r, rows);
        assert_eq!(f, names);

        let genome = Genome {
            is_gene: Some(vec![0, 2, 4]),
            fs_gene: Some(vec![1, 5]),
            prep_genes: vec![],
            model_gene: step(StepId::Model, "gnb"),
        };
        let (r, f) = apply_dr(&genome, &rows, &names);
        assert_eq!(r, vec![0, 2, 4]);
        assert_eq!(f, vec!["f1".to_string(), "f5".to_string()]);
    }

    #[test]
    fn feature_fraction_accounting() {
        // 168 of 216 features selected: about 78%.
        let names: Vec<String> = (0..216).map(|i| format!("f{i}")).collect();
        let rows: Vec<usize> = (0..10).collect();
        let genome = Genome {
            is_gene: None,
            fs_gene: Some((0..168).collect()),
            prep_genes: vec![],
            model_gene: step(StepId::Model, "gnb"),
        };
        let (_, f) = apply_dr(&genome, &rows, &names);
        let frac = f.len() as f64 / 216.0;
        assert!((frac - 0.78).abs() < 0.01);
    }

    fn simple_genome(blueprint: &crate::analyzer::Blueprint) -> Genome {
        let prep_genes = blueprint
            .prep_steps()
            .iter()
            .map(|s| {
                let method = match s.step_id {
                    StepId::Scale => "standard",
                    StepId::Encode => "one-hot",
                    StepId::ImputeNumerical => "mean",
                    StepId::ImputeCategorical => "most-frequent",
                    StepId::DropIdentifiers => "drop",
                    StepId::Model => unreachable!(),
                };
                step(s.step_id, method)
            })
            .collect();
        let mut model = step(StepId::Model, "knn");
        model.params.insert("k".into(), ParamValue::Int(1));
        model
            .params
            .insert("weights".into(), ParamValue::Str("uniform".into()));
        Genome {
            is_gene: None,
            fs_gene: None,
            prep_genes,
            model_gene: model,
        }
    }

    #[test]
    fn scaler_state_learned_from_reduced_rows_only() {
        let spec = SynthSpec {
            n_rows: 40,
            n_numerical: 2,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 3).unwrap();
        let (_, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let mut genome = simple_genome(&bp);
        let selected: Vec<usize> = (0..20).collect();
        genome.is_gene = Some(selected.clone());
        let fp = fit_pipeline(&genome, &bp, &ds, 0).unwrap();

        // Oracle: mean of the first column over the selected rows only.
        let col = &ds.columns[0];
        let expected: f64 = selected
            .iter()
            .map(|&r| col.cells[r].as_number().unwrap())
            .sum::<f64>()
            / 20.0;
        let scale_state = fp
            .steps
            .iter()
            .find(|s| s.step_id == StepId::Scale)
            .map(|s| &s.state)
            .unwrap();
        if let StepState::Scale { params } = scale_state {
            assert!((params[&col.name].center - expected).abs() < 1e-12);
        } else {
            panic!("wrong state");
        }
        assert_eq!(fp.training_dims, (20, 2));
        assert!((fp.is_fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_nn_training_mcc_is_one() {
        let spec = SynthSpec {
            n_rows: 60,
            n_numerical: 3,
            n_classes: 3,
            class_sep: 6.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 10).unwrap();
        let (_, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let genome = simple_genome(&bp);
        let fp = fit_pipeline(&genome, &bp, &ds, 0).unwrap();
        let preds = fp.predict(&ds).unwrap();
        let cm = ConfusionMatrix::from_labels(&ds.target, &preds, ds.class_count());
        assert_eq!(mcc(&cm), 1.0);
    }

    #[test]
    fn predict_on_empty_row_set() {
        let spec = SynthSpec {
            n_rows: 30,
            n_numerical: 2,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 4).unwrap();
        let (_, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let fp = fit_pipeline(&simple_genome(&bp), &bp, &ds, 0).unwrap();
        let empty = ds.subset(&[]);
        assert_eq!(fp.predict(&empty).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn validation_missing_filled_with_train_statistic() {
        let spec = SynthSpec {
            n_rows: 50,
            n_numerical: 2,
            missing_rate: 0.1,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 6).unwrap();
        let (_, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let genome = simple_genome(&bp);
        let fp = fit_pipeline(&genome, &bp, &ds, 0).unwrap();
        let impute = fp
            .steps
            .iter()
            .find(|s| s.step_id == StepId::ImputeNumerical)
            .unwrap();
        let fills = match &impute.state {
            StepState::ImputeNum { fills } => fills.clone(),
            _ => panic!("wrong state"),
        };
        // A probe dataset that is missing in column 0.
        let mut probe = ds.subset(&[0]);
        probe.columns[0].cells[0] = Cell::Missing;
        let x = fp.transform(&probe, &[0]).unwrap();
        // The transformed value equals the scaled train-fill statistic.
        let scale = fp
            .steps
            .iter()
            .find_map(|s| match &s.state {
                StepState::Scale { params } => Some(params[&ds.columns[0].name].clone()),
                _ => None,
            })
            .unwrap();
        let expected = (fills[&ds.columns[0].name] - scale.center) / scale.scale;
        assert!((x.get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn no_leakage_perturbing_other_rows() {
        let spec = SynthSpec {
            n_rows: 80,
            n_numerical: 2,
            n_categorical: 1,
            missing_rate: 0.05,
            n_classes: 2,
            ..Default::default()
        };
        let ds = generate_synthetic(&spec, 8).unwrap();
        let train_rows: Vec<usize> = (0..60).collect();
        let train = ds.subset(&train_rows);
        let (_, bp) = analyze(&train, &SearchSpaceConfig::default()).unwrap();
        let genome = simple_genome(&bp);
        let fp1 = fit_pipeline(&genome, &bp, &train, 7).unwrap();

        // Fitting again after mutating non-training rows changes nothing.
        let mut perturbed = ds.clone();
        for r in 60..80 {
            perturbed.columns[0].cells[r] = Cell::Number(1e9);
        }
        let train2 = perturbed.subset(&train_rows);
        let fp2 = fit_pipeline(&genome, &bp, &train2, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&fp1).unwrap(),
            serde_json::to_string(&fp2).unwrap()
        );
    }

    #[test]
    fn text_binary_and_integer_categorical_flow_through_encoder() {
        use crate::dataset::{Cell, Column, Dataset};
        let n = 40;
        let target: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let ds = Dataset {
            columns: vec![
                Column {
                    name: "flag".into(),
                    cells: target
                        .iter()
                        .map(|&c| Cell::Text(if c == 0 { "yes".into() } else { "no".into() }))
                        .collect(),
                },
                Column {
                    name: "code".into(),
                    cells: (0..n).map(|i| Cell::Number((i % 4) as f64)).collect(),
                },
                Column {
                    name: "value".into(),
                    cells: target
                        .iter()
                        .enumerate()
                        .map(|(i, &c)| Cell::Number(c as f64 * 3.5 + i as f64 * 0.013))
                        .collect(),
                },
            ],
            target,
            target_name: "y".into(),
            label_names: vec!["a".into(), "b".into()],
        };
        let (profiles, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let kind_of = |name: &str| profiles.iter().find(|p| p.name == name).unwrap().kind;
        assert_eq!(kind_of("flag"), crate::analyzer::ColumnKind::Binary);
        assert_eq!(kind_of("code"), crate::analyzer::ColumnKind::Categorical);
        assert_eq!(kind_of("value"), crate::analyzer::ColumnKind::Numerical);
        assert!(bp.has_step(StepId::Encode));

        let fp = fit_pipeline(&simple_genome(&bp), &bp, &ds, 0).unwrap();
        // Both the text binary and the integer categorical end up one-hot.
        let encode = fp
            .steps
            .iter()
            .find(|s| s.step_id == StepId::Encode)
            .unwrap();
        if let StepState::OneHot { categories } = &encode.state {
            assert_eq!(categories["flag"], vec!["no", "yes"]);
            assert_eq!(categories["code"], vec!["0", "1", "2", "3"]);
        } else {
            panic!("expected one-hot state");
        }
        // The text binary column is perfectly informative: training MCC 1.
        let preds = fp.predict(&ds).unwrap();
        let cm = crate::metrics::ConfusionMatrix::from_labels(&ds.target, &preds, 2);
        assert_eq!(crate::metrics::mcc(&cm), 1.0);
    }

    #[test]
    fn binary_numeric_column_maps_to_unit_values() {
        let spec = SynthSpec {
            n_rows: 60,
            n_numerical: 1,
            n_binary: 1,
            n_classes: 2,
            ..Default::default()
        };
        let mut ds = generate_synthetic(&spec, 9).unwrap();
        // Shift the binary column to {5, 9} to exercise the mapping.
        for cell in ds.column("bin_0").unwrap().cells.clone().iter().enumerate() {
            let (i, c) = cell;
            if let Cell::Number(v) = c {
                ds.columns[1].cells[i] = Cell::Number(5.0 + v * 4.0);
            }
        }
        let (_, bp) = analyze(&ds, &SearchSpaceConfig::default()).unwrap();
        let fp = fit_pipeline(&simple_genome(&bp), &bp, &ds, 0).unwrap();
        let map = &fp.binary_maps["bin_0"];
        assert_eq!((map.lo, map.hi), (5.0, Some(9.0)));
    }

    proptest! {
        /// fit-then-apply equals the direct formula on random small columns.
        #[test]
        fn scaler_matches_direct_formula(
            values in proptest::collection::vec(-100.0f64..100.0, 2..20),
            which in 0usize..3,
        ) {
            let method = ["standard", "min-max", "robust"][which];
            let col: Vec<Option<f64>> = values.iter().copied().map(Some).collect();
            let mut t = table(vec![num_col("x", &col)]);
            let state = fit_step(&step(StepId::Scale, method), &t).unwrap();
            apply_step(&state, &mut t).unwrap();
            let m = t.to_matrix().unwrap();

            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (center, scale) = match method {
                "standard" => {
                    let mu = values.iter().sum::<f64>() / values.len() as f64;
                    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
                        / values.len() as f64;
                    (mu, var.sqrt())
                }
                "min-max" => (sorted[0], sorted[sorted.len() - 1] - sorted[0]),
                _ => {
                    let q = |p: f64| {
                        let h = (sorted.len() - 1) as f64 * p;
                        let lo = h.floor() as usize;
                        let hi = (lo + 1).min(sorted.len() - 1);
                        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
                    };
                    (q(0.5), q(0.75) - q(0.25))
                }
            };
            for (i, v) in values.iter().enumerate() {
                let expected = if scale > 0.0 { (v - center) / scale } else { 0.0 };
                prop_assert!((m.get(i, 0) - expected).abs() < 1e-9);
            }
        }

        /// Encoders match a direct construction from the category table.
        #[test]
        fn encoder_matches_direct_formula(
            raw in proptest::collection::vec(proptest::option::weighted(0.85, 0usize..5), 2..25),
            probe in proptest::collection::vec(proptest::option::weighted(0.85, 0usize..7), 1..25),
            one_hot in proptest::bool::ANY,
        ) {
            prop_assume!(raw.iter().any(Option::is_some));
            let to_cells = |v: &[Option<usize>]| -> Vec<Option<&'static str>> {
                v.iter()
                    .map(|o| o.map(|i| ["a", "b", "c", "d", "e", "f", "g"][i]))
                    .collect()
            };
            let fit_cells = to_cells(&raw);
            let fit_table = table(vec![cat_col("c", &fit_cells)]);
            let method = if one_hot { "one-hot" } else { "ordinal" };
            let state = fit_step(&step(StepId::Encode, method), &fit_table).unwrap();

            // Oracle: sorted distinct non-missing fit values.
            let mut cats: Vec<&str> = fit_cells.iter().flatten().copied().collect();
            cats.sort_unstable();
            cats.dedup();

            let probe_cells = to_cells(&probe);
            let mut apply_table = table(vec![cat_col("c", &probe_cells)]);
            apply_step(&state, &mut apply_table).unwrap();
            let m = apply_table.to_matrix().unwrap();
            for (i, cell) in probe_cells.iter().enumerate() {
                let position = cell.and_then(|v| cats.iter().position(|c| *c == v));
                if one_hot {
                    prop_assert_eq!(m.n_cols(), cats.len());
                    for j in 0..cats.len() {
                        let expected = f64::from(position == Some(j));
                        prop_assert_eq!(m.get(i, j), expected);
                    }
                } else {
                    let expected = position.map_or(cats.len() as f64, |p| p as f64);
                    prop_assert_eq!(m.get(i, 0), expected);
                }
            }
        }

        /// Categorical imputers fill with the fitted value and nothing else.
        #[test]
        fn categorical_imputer_matches_direct_formula(
            raw in proptest::collection::vec(proptest::option::weighted(0.7, 0usize..4), 2..25),
            most_frequent in proptest::bool::ANY,
        ) {
            prop_assume!(raw.iter().any(Option::is_some));
            let names = ["w", "x", "y", "z"];
            let cells: Vec<Option<&str>> = raw.iter().map(|o| o.map(|i| names[i])).collect();
            let mut t = table(vec![cat_col("c", &cells)]);
            let method = if most_frequent { "most-frequent" } else { "constant" };
            let state = fit_step(&step(StepId::ImputeCategorical, method), &t).unwrap();
            apply_step(&state, &mut t).unwrap();

            let fill: String = if most_frequent {
                // Oracle: highest count, ties to the smallest value.
                let mut counts: Vec<(usize, &str)> = names
                    .iter()
                    .map(|n| (cells.iter().flatten().filter(|v| *v == n).count(), *n))
                    .collect();
                counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
                counts[0].1.to_string()
            } else {
                MISSING_SENTINEL.to_string()
            };
            let ColData::Cat(out) = &t.columns[0].data else { panic!("wrong column type") };
            for (v, orig) in out.iter().zip(&cells) {
                let expected = orig.map_or(fill.clone(), str::to_string);
                prop_assert_eq!(v.as_deref(), Some(expected.as_str()));
            }
        }

        /// Imputers fill with the fitted statistic and leave nothing missing.
        #[test]
        fn imputer_matches_direct_formula(
            values in proptest::collection::vec(proptest::option::weighted(0.8, -50.0f64..50.0), 3..20),
            which in 0usize..3,
        ) {
            prop_assume!(values.iter().any(Option::is_some));
            let method = ["mean", "median", "constant"][which];
            let mut t = table(vec![num_col("x", &values)]);
            let state = fit_step(&step(StepId::ImputeNumerical, method), &t).unwrap();
            apply_step(&state, &mut t).unwrap();
            let m = t.to_matrix().unwrap();

            let present: Vec<f64> = values.iter().flatten().copied().collect();
            let mut sorted = present.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let fill = match method {
                "mean" => present.iter().sum::<f64>() / present.len() as f64,
                "median" => {
                    let h = (sorted.len() - 1) as f64 * 0.5;
                    let lo = h.floor() as usize;
                    let hi = (lo + 1).min(sorted.len() - 1);
                    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
                }
                _ => 0.0,
            };
            for (i, v) in values.iter().enumerate() {
                let expected = v.unwrap_or(fill);
                prop_assert!((m.get(i, 0) - expected).abs() < 1e-9);
            }
        }
    }
}
