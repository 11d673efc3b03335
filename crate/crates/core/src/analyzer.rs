//! Dataset analysis: infer what each feature column is and derive the
//! pipeline blueprint — which preprocessing steps this dataset needs and the
//! option space of each step.
//!
//! Only steps whose trigger condition holds are added, so the search never
//! spends time tuning methods the data does not need.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::BlueprintError;
use crate::learners::default_model_space;
use crate::space::{SearchSpaceConfig, StepOption};

/// What a feature column is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Binary,
    Categorical,
    Numerical,
    Identifier,
}

/// Pipeline step identifiers, in fixed pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    DropIdentifiers,
    ImputeNumerical,
    ImputeCategorical,
    Encode,
    Scale,
    Model,
}

/// Analysis result for one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub kind: ColumnKind,
    pub has_missing: bool,
    pub distinct_count: usize,
    pub is_text: bool,
}

/// Which processing lane a column flows through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnLane {
    /// Dropped before any processing.
    Dropped,
    /// Plain numeric values: numeric imputation, scaling.
    Numeric,
    /// Two-valued numeric: mapped onto {0, 1}, numeric imputation, no scaling.
    NumericBinary,
    /// Category strings: categorical imputation, encoding.
    Categorical,
}

/// Name, kind and lane of one feature column inside a blueprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub kind: ColumnKind,
    pub is_text: bool,
}

impl FeatureInfo {
    pub fn lane(&self) -> ColumnLane {
        match self.kind {
            ColumnKind::Identifier => ColumnLane::Dropped,
            ColumnKind::Numerical => ColumnLane::Numeric,
            ColumnKind::Binary if self.is_text => ColumnLane::Categorical,
            ColumnKind::Binary => ColumnLane::NumericBinary,
            ColumnKind::Categorical => ColumnLane::Categorical,
        }
    }
}

/// One step of the blueprint with its selectable options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub step_id: StepId,
    pub options: Vec<StepOption>,
}

/// The pipeline structure derived from dataset analysis. The genetic search
/// configures each step; the structure itself is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blueprint {
    /// Steps in pipeline order; the model step is always last.
    pub steps: Vec<StepSpec>,
    /// Every feature column of the analyzed data, in original order.
    pub features: Vec<FeatureInfo>,
    /// Number of training rows instance-selection indices range over.
    pub max_instances: usize,
    /// Number of feature columns after identifier removal.
    pub max_features: usize,
    pub class_count: usize,
    /// Class of each training row, used for stratified instance sampling.
    pub instance_classes: Vec<usize>,
}

impl Blueprint {
    /// Feature columns that survive identifier removal, in order. Feature
    /// selection indices are defined over this list.
    pub fn usable_features(&self) -> Vec<&FeatureInfo> {
        self.features
            .iter()
            .filter(|f| f.kind != ColumnKind::Identifier)
            .collect()
    }

    pub fn prep_steps(&self) -> &[StepSpec] {
        &self.steps[..self.steps.len() - 1]
    }

    pub fn model_step(&self) -> &StepSpec {
        self.steps
            .last()
            .expect("blueprint always has a model step")
    }

    pub fn has_step(&self, id: StepId) -> bool {
        self.steps.iter().any(|s| s.step_id == id)
    }

    pub fn step(&self, id: StepId) -> Option<&StepSpec> {
        self.steps.iter().find(|s| s.step_id == id)
    }

    /// Classes that appear among the training rows, ascending.
    pub fn present_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.class_count];
        for &c in &self.instance_classes {
            seen[c] = true;
        }
        (0..self.class_count).filter(|&c| seen[c]).collect()
    }
}

fn integer_valued(col: &crate::dataset::Column) -> bool {
    col.cells.iter().all(|c| match c {
        crate::dataset::Cell::Number(v) => v.fract() == 0.0,
        _ => true,
    })
}

/// Assign each feature column exactly one kind.
///
/// Priority: identifier (key-like: integer or text values, all distinct,
/// nothing missing), then binary (two distinct values), then categorical
/// (text, or low-cardinality integers), then numerical. Continuous floats
/// are all-distinct by nature and never count as identifiers.
pub fn infer_column_kinds(ds: &Dataset, cfg: &SearchSpaceConfig) -> Vec<ColumnProfile> {
    let n_rows = ds.n_rows();
    let cat_threshold = cfg
        .cat_int_min
        .max((cfg.cat_int_frac * n_rows as f64) as usize);
    ds.columns
        .iter()
        .map(|col| {
            let distinct = col.distinct_count();
            let has_missing = col.has_missing();
            let is_text = col.is_text();
            let key_like = is_text || integer_valued(col);
            let kind = if key_like && !has_missing && distinct == n_rows && n_rows > 2 {
                ColumnKind::Identifier
            } else if distinct == 2 {
                ColumnKind::Binary
            } else if is_text || (integer_valued(col) && distinct <= cat_threshold) {
                ColumnKind::Categorical
            } else {
                ColumnKind::Numerical
            };
            ColumnProfile {
                name: col.name.clone(),
                kind,
                has_missing,
                distinct_count: distinct,
                is_text,
            }
        })
        .collect()
}

fn numeric_imputer_options(cfg: &SearchSpaceConfig) -> Vec<StepOption> {
    cfg.numeric_imputers
        .iter()
        .map(|m| StepOption::new(m))
        .collect()
}

fn categorical_imputer_options(cfg: &SearchSpaceConfig) -> Vec<StepOption> {
    cfg.categorical_imputers
        .iter()
        .map(|m| StepOption::new(m))
        .collect()
}

/// Derive the blueprint for a dataset from its column profiles.
///
/// Step triggers: identifiers are always dropped; per-lane imputers appear
/// iff that lane has missing values; an encoder appears iff any column flows
/// through the categorical lane; a scaler appears iff a numerical column
/// exists. The model step is always last.
pub fn build_blueprint(
    ds: &Dataset,
    profiles: &[ColumnProfile],
    cfg: &SearchSpaceConfig,
) -> Result<Blueprint, BlueprintError> {
    let features: Vec<FeatureInfo> = profiles
        .iter()
        .map(|p| FeatureInfo {
            name: p.name.clone(),
            kind: p.kind,
            is_text: p.is_text,
        })
        .collect();
    let max_features = features
        .iter()
        .filter(|f| f.kind != ColumnKind::Identifier)
        .count();
    if max_features == 0 {
        return Err(BlueprintError::NoUsableFeatures);
    }

    let lane_of = |p: &ColumnProfile| {
        FeatureInfo {
            name: p.name.clone(),
            kind: p.kind,
            is_text: p.is_text,
        }
        .lane()
    };
    let has_identifier = profiles.iter().any(|p| p.kind == ColumnKind::Identifier);
    let numeric_missing = profiles.iter().any(|p| {
        p.has_missing && matches!(lane_of(p), ColumnLane::Numeric | ColumnLane::NumericBinary)
    });
    let categorical_missing = profiles
        .iter()
        .any(|p| p.has_missing && lane_of(p) == ColumnLane::Categorical);
    let any_categorical = profiles
        .iter()
        .any(|p| lane_of(p) == ColumnLane::Categorical);
    let any_numerical = profiles.iter().any(|p| p.kind == ColumnKind::Numerical);

    let mut steps = Vec::new();
    if has_identifier {
        steps.push(StepSpec {
            step_id: StepId::DropIdentifiers,
            options: vec![StepOption::new("drop")],
        });
    }
    if numeric_missing {
        steps.push(StepSpec {
            step_id: StepId::ImputeNumerical,
            options: numeric_imputer_options(cfg),
        });
    }
    if categorical_missing {
        steps.push(StepSpec {
            step_id: StepId::ImputeCategorical,
            options: categorical_imputer_options(cfg),
        });
    }
    if any_categorical {
        steps.push(StepSpec {
            step_id: StepId::Encode,
            options: cfg.encoders.iter().map(|m| StepOption::new(m)).collect(),
        });
    }
    if any_numerical {
        steps.push(StepSpec {
            step_id: StepId::Scale,
            options: cfg.scalers.iter().map(|m| StepOption::new(m)).collect(),
        });
    }
    steps.push(StepSpec {
        step_id: StepId::Model,
        options: default_model_space(),
    });

    Ok(Blueprint {
        steps,
        features,
        max_instances: ds.n_rows(),
        max_features,
        class_count: ds.class_count(),
        instance_classes: ds.target.clone(),
    })
}

/// Convenience wrapper: infer kinds, then build the blueprint.
pub fn analyze(
    ds: &Dataset,
    cfg: &SearchSpaceConfig,
) -> Result<(Vec<ColumnProfile>, Blueprint), BlueprintError> {
    let profiles = infer_column_kinds(ds, cfg);
    let blueprint = build_blueprint(ds, &profiles, cfg)?;
    Ok((profiles, blueprint))
}
