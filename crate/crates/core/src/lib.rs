//! edca-core: evolutionary, data-centric pipeline search for tabular
//! classification.
//!
//! The library analyzes a dataset to derive a minimal preprocessing
//! blueprint, then evolves complete pipeline configurations — optional
//! instance- and feature-selection index sets, one configured gene per
//! preprocessing step, and a model gene — minimizing validation error under
//! a time or evaluation budget while tracking how much data each solution
//! actually uses.

pub mod analyzer;
pub mod dataset;
pub mod error;
pub mod evolution;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod pipeline;
pub mod space;

pub use analyzer::{
    analyze, build_blueprint, infer_column_kinds, Blueprint, ColumnKind, ColumnProfile, StepId,
};
pub use dataset::{
    generate_synthetic, kfold, load_csv, split_holdout, write_csv, Cell, Column, Dataset,
    SplitPair, SynthSpec, DEFAULT_MISSING_TOKENS,
};
pub use error::{BlueprintError, DataError, HarnessError, PipelineFailure, SearchError};
pub use evolution::{
    crossover, evolve, evolve_with, init_population, mutate, random_search, random_search_with,
    repair, tournament_select, EvaluatedIndividual, GAConfig, SearchResult,
};
pub use harness::{
    emit_reports, retrain_all, run_experiment, DataSource, OuterSplit, RetrainMode, RunConfig,
    RunReport, Searcher,
};
pub use learners::{default_model_space, fit_model, sample_model_gene, FittedModel, Matrix};
pub use metrics::{
    data_usage, dr_mode, fitness_from_mcc, mcc, ConfusionMatrix, DrMode, UsageReport,
};
pub use pipeline::{
    apply_dr, fit_pipeline, validate_genome, ConfiguredStep, FittedPipeline, Genome,
};
pub use space::{ParamSpace, ParamValue, SearchSpaceConfig, StepOption};
