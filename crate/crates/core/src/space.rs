//! Hyperparameter spaces and the configuration of the search space.
//!
//! Every tunable pipeline step declares its options as a method name plus a
//! map of parameter spaces. Spaces are either closed numeric ranges (with a
//! linear or log sampling scale) or finite enumerations.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A closed range or finite enumeration a hyperparameter is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSpace {
    /// Inclusive integer range.
    IntRange { lo: i64, hi: i64 },
    /// Inclusive float range; `log` switches to log-uniform sampling.
    FloatRange { lo: f64, hi: f64, log: bool },
    /// Finite enumeration of string choices.
    Choice { options: Vec<String> },
}

/// A concrete hyperparameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Float(v) => Some(*v as i64),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Float(v) => Some(*v),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl ParamSpace {
    /// Draw a value uniformly from the space (log-uniform for log ranges).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            ParamSpace::IntRange { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            ParamSpace::FloatRange { lo, hi, log } => {
                let v = if *log {
                    let (a, b) = (lo.ln(), hi.ln());
                    (a + rng.random_range(0.0..=1.0) * (b - a)).exp()
                } else {
                    lo + rng.random_range(0.0..=1.0) * (hi - lo)
                };
                ParamValue::Float(v.clamp(*lo, *hi))
            }
            ParamSpace::Choice { options } => {
                ParamValue::Str(options[rng.random_range(0..options.len())].clone())
            }
        }
    }

    /// True when the value lies inside the space.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamSpace::IntRange { lo, hi }, ParamValue::Int(v)) => *lo <= *v && *v <= *hi,
            (ParamSpace::FloatRange { lo, hi, .. }, ParamValue::Float(v)) => *lo <= *v && *v <= *hi,
            (ParamSpace::Choice { options }, ParamValue::Str(s)) => options.iter().any(|o| o == s),
            _ => false,
        }
    }

    /// Clamp a value into the space, resampling when the value's type does
    /// not match the space.
    pub fn clamp<R: Rng + ?Sized>(&self, value: &ParamValue, rng: &mut R) -> ParamValue {
        match (self, value) {
            (ParamSpace::IntRange { lo, hi }, ParamValue::Int(v)) => {
                ParamValue::Int(*v.max(lo).min(hi))
            }
            (ParamSpace::FloatRange { lo, hi, .. }, ParamValue::Float(v)) => {
                ParamValue::Float(v.clamp(*lo, *hi))
            }
            (ParamSpace::Choice { options }, ParamValue::Str(s))
                if options.iter().any(|o| o == s) =>
            {
                value.clone()
            }
            _ => self.sample(rng),
        }
    }
}

/// One selectable method for a pipeline step, with its parameter spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOption {
    pub method: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamSpace>,
}

impl StepOption {
    pub fn new(method: &str) -> Self {
        Self {
            method: method.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, space: ParamSpace) -> Self {
        self.params.insert(name.to_string(), space);
        self
    }

    /// Sample every parameter of this option.
    pub fn sample_params<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<String, ParamValue> {
        self.params
            .iter()
            .map(|(k, s)| (k.clone(), s.sample(rng)))
            .collect()
    }
}

/// Declared option spaces for every preprocessing step plus analyzer knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpaceConfig {
    pub scalers: Vec<String>,
    pub encoders: Vec<String>,
    pub numeric_imputers: Vec<String>,
    pub categorical_imputers: Vec<String>,
    /// Integer columns with at most `max(cat_int_min, cat_int_frac * n_rows)`
    /// distinct values are treated as categorical.
    pub cat_int_min: usize,
    pub cat_int_frac: f64,
}

impl Default for SearchSpaceConfig {
    fn default() -> Self {
        Self {
            scalers: vec!["standard".into(), "min-max".into(), "robust".into()],
            encoders: vec!["one-hot".into(), "ordinal".into()],
            numeric_imputers: vec!["mean".into(), "median".into(), "constant".into()],
            categorical_imputers: vec!["most-frequent".into(), "constant".into()],
            cat_int_min: 20,
            cat_int_frac: 0.05,
        }
    }
}
