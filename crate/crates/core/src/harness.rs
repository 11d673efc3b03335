//! Experiment orchestration: config-driven runs, outer cross-validation,
//! repeated seeds, retraining on all data, and report emission.
//!
//! Every (run, fold) cell derives its split and search seeds from the run
//! config seed, so a report is fully determined by the config whenever the
//! evaluation-count stop criterion is used.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analyzer::{analyze, Blueprint, StepId};
use crate::dataset::{
    generate_synthetic, kfold, load_csv, split_holdout, Dataset, SynthSpec, DEFAULT_MISSING_TOKENS,
};
use crate::error::{HarnessError, PipelineFailure};
use crate::evolution::{evolve, random_search, GAConfig, GenerationStat};
use crate::metrics::{data_usage, dr_mode, mcc, ConfusionMatrix, DrMode, UsageReport};
use crate::pipeline::{fit_pipeline, FittedPipeline, Genome};
use crate::space::SearchSpaceConfig;

/// Where the experiment data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: String, target: String },
    Synthetic { spec: SynthSpec },
}

/// Outer evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterSplit {
    Cv { k: usize },
    Holdout { test_fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Searcher {
    Edca,
    Random,
}

/// What retraining on all data regrows: instances only, or both genes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrainMode {
    Instances,
    Both,
}

/// Full configuration of an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    pub missing_tokens: Vec<String>,
    pub searcher: Searcher,
    pub outer: OuterSplit,
    pub n_runs: usize,
    pub val_fraction: f64,
    pub stratified: bool,
    pub retrain_all: bool,
    pub retrain_mode: RetrainMode,
    pub output_dir: Option<String>,
    pub seed: u64,
    pub ga: GAConfig,
    pub space: SearchSpaceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic {
                spec: SynthSpec::default(),
            },
            missing_tokens: DEFAULT_MISSING_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            searcher: Searcher::Edca,
            outer: OuterSplit::Cv { k: 5 },
            n_runs: 30,
            val_fraction: 0.25,
            stratified: true,
            retrain_all: false,
            retrain_mode: RetrainMode::Instances,
            output_dir: None,
            seed: 0,
            ga: GAConfig::default(),
            space: SearchSpaceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_runs == 0 {
            return Err(HarnessError::Config("n_runs must be at least 1".into()));
        }
        match self.outer {
            OuterSplit::Cv { k } if k < 2 => {
                return Err(HarnessError::Config("outer cv k must be at least 2".into()))
            }
            OuterSplit::Holdout { test_fraction }
                if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 =>
            {
                return Err(HarnessError::Config(
                    "holdout test_fraction must lie in (0, 1)".into(),
                ))
            }
            _ => {}
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(HarnessError::Config(
                "val_fraction must lie in (0, 1)".into(),
            ));
        }
        self.ga
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Dataset, HarnessError> {
        match &self.data {
            DataSource::Csv { path, target } => Ok(load_csv(path, target, &self.missing_tokens)?),
            DataSource::Synthetic { spec } => Ok(generate_synthetic(spec, self.seed)?),
        }
    }
}

/// splitmix64-style seed derivation.
fn mix_seed(base: u64, salt: &[u64]) -> u64 {
    let mut z = base;
    for &s in salt {
        z ^= s
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x2545_F491_4F6C_DD1D);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Round to `digits` significant digits for byte-stable reports.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    (x * factor).round() / factor
}

/// Metrics of one successful (run, fold) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub test_mcc: f64,
    pub retrained_mcc: Option<f64>,
    pub best_fitness: f64,
    pub usage: UsageReport,
    pub dr_mode: DrMode,
    pub evaluations: usize,
    pub restarts: usize,
    pub model: String,
}

/// One (run, fold) record: either metrics or a failure note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub run: usize,
    pub fold: usize,
    pub metrics: Option<FoldMetrics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    fn from_values(values: &[f64]) -> MeanStd {
        let n = values.len();
        if n == 0 {
            return MeanStd {
                mean: 0.0,
                std: 0.0,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd {
            mean: round_sig(mean, 6),
            std: round_sig(std, 6),
            n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub test_mcc: MeanStd,
    pub retrained_mcc: Option<MeanStd>,
    pub best_fitness: MeanStd,
    pub pct_data: MeanStd,
    pub pct_instances: MeanStd,
    pub pct_features: MeanStd,
    pub evaluations: MeanStd,
    pub restarts: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub version: String,
}

/// Serialized per-(run, fold) best pipeline, with the headline columns a
/// pipeline summary table needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestPipelineArtifact {
    pub run: usize,
    pub fold: usize,
    pub pct_instances: f64,
    pub pct_features: f64,
    pub imputer: Option<String>,
    pub scaler: Option<String>,
    pub encoder: Option<String>,
    pub model: String,
    pub test_mcc: f64,
    pub pipeline: FittedPipeline,
}

/// Everything a finished experiment produced. Wall-clock timings and the
/// per-cell artifacts are kept out of `report.json` so identical configs
/// yield byte-identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub environment: Environment,
    pub config: RunConfig,
    pub records: Vec<FoldRecord>,
    pub aggregates: Aggregates,
    #[serde(skip)]
    pub pipelines: Vec<BestPipelineArtifact>,
    #[serde(skip)]
    pub histories: Vec<(usize, usize, Vec<GenerationStat>)>,
    #[serde(skip)]
    pub wall_times: Vec<(usize, usize, f64)>,
}

/// Drop the instance-selection gene (and, in [`RetrainMode::Both`], the
/// feature gene) and refit on the full outer-training fold with the same
/// step configurations.
pub fn retrain_all(
    best: &Genome,
    blueprint: &Blueprint,
    full_train: &Dataset,
    mode: RetrainMode,
    seed: u64,
) -> Result<FittedPipeline, PipelineFailure> {
    let mut genome = best.clone();
    genome.is_gene = None;
    if mode == RetrainMode::Both {
        genome.fs_gene = None;
    }
    fit_pipeline(&genome, blueprint, full_train, seed)
}

fn outer_pairs(
    ds: &Dataset,
    cfg: &RunConfig,
    run_seed: u64,
) -> Result<Vec<crate::dataset::SplitPair>, HarnessError> {
    match cfg.outer {
        OuterSplit::Cv { k } => Ok(kfold(ds, k, cfg.stratified, run_seed)?),
        OuterSplit::Holdout { test_fraction } => Ok(vec![split_holdout(
            ds,
            test_fraction,
            cfg.stratified,
            run_seed,
        )?]),
    }
}

fn score_on(ds: &Dataset, pipeline: &FittedPipeline) -> Result<f64, PipelineFailure> {
    let preds = pipeline.predict(ds)?;
    let cm = ConfusionMatrix::from_labels(&ds.target, &preds, ds.class_count());
    Ok(mcc(&cm))
}

fn step_method(fp: &FittedPipeline, id: StepId) -> Option<String> {
    fp.steps
        .iter()
        .find(|s| s.step_id == id)
        .map(|s| s.method.clone())
}

/// Run the configured experiment: for every run and outer fold, split the
/// outer-training data into internal train/validation, derive the blueprint
/// from the internal training data, search, and score the best pipeline on
/// the untouched outer test fold.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let ds = cfg.load_dataset()?;

    let mut records = Vec::new();
    let mut pipelines = Vec::new();
    let mut histories = Vec::new();
    let mut wall_times = Vec::new();

    for run in 0..cfg.n_runs {
        let run_seed = mix_seed(cfg.seed, &[1, run as u64]);
        let pairs = outer_pairs(&ds, cfg, run_seed)?;
        for (fold, pair) in pairs.iter().enumerate() {
            let cell = run_fold_cell(cfg, &ds, run, fold, pair);
            match cell {
                Ok(cell) => {
                    wall_times.push((run, fold, cell.wall_time));
                    histories.push((run, fold, cell.history));
                    pipelines.push(cell.artifact);
                    records.push(FoldRecord {
                        run,
                        fold,
                        metrics: Some(cell.metrics),
                        failure: None,
                    });
                }
                Err(message) => {
                    records.push(FoldRecord {
                        run,
                        fold,
                        metrics: None,
                        failure: Some(message),
                    });
                }
            }
        }
    }

    let aggregates = aggregate(&records);
    Ok(RunReport {
        environment: Environment {
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: cfg.clone(),
        records,
        aggregates,
        pipelines,
        histories,
        wall_times,
    })
}

struct CellOutcome {
    metrics: FoldMetrics,
    artifact: BestPipelineArtifact,
    history: Vec<GenerationStat>,
    wall_time: f64,
}

fn run_fold_cell(
    cfg: &RunConfig,
    ds: &Dataset,
    run: usize,
    fold: usize,
    pair: &crate::dataset::SplitPair,
) -> Result<CellOutcome, String> {
    let outer_train = ds.subset(&pair.train_indices);
    let test = ds.subset(&pair.val_indices);
    let cell_seed = mix_seed(cfg.seed, &[2, run as u64, fold as u64]);

    let internal = split_holdout(&outer_train, cfg.val_fraction, cfg.stratified, cell_seed)
        .map_err(|e| format!("internal split: {e}"))?;
    let internal_train = outer_train.subset(&internal.train_indices);
    let internal_val = outer_train.subset(&internal.val_indices);

    let (_, blueprint) =
        analyze(&internal_train, &cfg.space).map_err(|e| format!("analysis: {e}"))?;

    let mut ga = cfg.ga.clone();
    ga.seed = mix_seed(cfg.seed, &[3, run as u64, fold as u64]);
    let result = match cfg.searcher {
        Searcher::Edca => evolve(&blueprint, &internal_train, &internal_val, &ga),
        Searcher::Random => random_search(&blueprint, &internal_train, &internal_val, &ga),
    }
    .map_err(|e| format!("search: {e}"))?;

    if result.best.failure {
        return Err("no successful pipeline evaluation".into());
    }

    // Refit the winning genome with its evaluation seed: bit-identical to
    // the pipeline scored during the search.
    let best_pipeline = fit_pipeline(
        &result.best.genome,
        &blueprint,
        &internal_train,
        result.best.eval_seed,
    )
    .map_err(|e| format!("refit: {e}"))?;
    let test_mcc = score_on(&test, &best_pipeline).map_err(|e| format!("test scoring: {e}"))?;

    let retrained_mcc = if cfg.retrain_all {
        match retrain_all(
            &result.best.genome,
            &blueprint,
            &outer_train,
            cfg.retrain_mode,
            result.best.eval_seed,
        ) {
            Ok(retrained) => score_on(&test, &retrained).ok().map(|m| round_sig(m, 6)),
            Err(_) => None,
        }
    } else {
        None
    };

    let usage = data_usage(
        &result.best.genome,
        outer_train.n_rows(),
        blueprint.max_features,
    );
    let metrics = FoldMetrics {
        test_mcc: round_sig(test_mcc, 6),
        retrained_mcc,
        best_fitness: round_sig(result.best.fitness, 6),
        usage: UsageReport {
            pct_instances: round_sig(usage.pct_instances, 6),
            pct_features: round_sig(usage.pct_features, 6),
            pct_data: round_sig(usage.pct_instances, 6) * round_sig(usage.pct_features, 6),
        },
        dr_mode: dr_mode(&result.best.genome),
        evaluations: result.total_evaluations,
        restarts: result.restarts,
        model: best_pipeline.model_method.clone(),
    };

    let artifact = BestPipelineArtifact {
        run,
        fold,
        pct_instances: metrics.usage.pct_instances,
        pct_features: metrics.usage.pct_features,
        imputer: step_method(&best_pipeline, StepId::ImputeNumerical)
            .or_else(|| step_method(&best_pipeline, StepId::ImputeCategorical)),
        scaler: step_method(&best_pipeline, StepId::Scale),
        encoder: step_method(&best_pipeline, StepId::Encode),
        model: best_pipeline.model_method.clone(),
        test_mcc: metrics.test_mcc,
        pipeline: best_pipeline,
    };

    Ok(CellOutcome {
        metrics,
        artifact,
        history: result.history,
        wall_time: result.wall_time_seconds,
    })
}

fn aggregate(records: &[FoldRecord]) -> Aggregates {
    let ok: Vec<&FoldMetrics> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let collect =
        |f: &dyn Fn(&FoldMetrics) -> f64| -> Vec<f64> { ok.iter().map(|m| f(m)).collect() };
    let retrained: Vec<f64> = ok.iter().filter_map(|m| m.retrained_mcc).collect();
    Aggregates {
        test_mcc: MeanStd::from_values(&collect(&|m| m.test_mcc)),
        retrained_mcc: if retrained.is_empty() {
            None
        } else {
            Some(MeanStd::from_values(&retrained))
        },
        best_fitness: MeanStd::from_values(&collect(&|m| m.best_fitness)),
        pct_data: MeanStd::from_values(&collect(&|m| m.usage.pct_data)),
        pct_instances: MeanStd::from_values(&collect(&|m| m.usage.pct_instances)),
        pct_features: MeanStd::from_values(&collect(&|m| m.usage.pct_features)),
        evaluations: MeanStd::from_values(&collect(&|m| m.evaluations as f64)),
        restarts: MeanStd::from_values(&collect(&|m| m.restarts as f64)),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let mut file = fs::File::create(path)
        .map_err(|e| HarnessError::Report(format!("create {}: {e}", path.display())))?;
    file.write_all(contents)
        .map_err(|e| HarnessError::Report(format!("write {}: {e}", path.display())))?;
    Ok(())
}

fn fmt6(x: f64) -> String {
    format!("{}", round_sig(x, 6))
}

/// Write `report.json`, per-cell best-pipeline artifacts, the DR-technique
/// histogram, evaluation counts, per-generation histories, wall-clock
/// timings and a markdown summary. Re-emitting the same report produces
/// byte-identical files.
pub fn emit_reports(
    report: &RunReport,
    outdir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, HarnessError> {
    let outdir = outdir.as_ref();
    fs::create_dir_all(outdir.join("pipelines"))
        .map_err(|e| HarnessError::Report(format!("create {}: {e}", outdir.display())))?;
    fs::create_dir_all(outdir.join("history"))
        .map_err(|e| HarnessError::Report(format!("create {}: {e}", outdir.display())))?;
    let mut written = Vec::new();

    let report_path = outdir.join("report.json");
    let json =
        serde_json::to_string_pretty(report).map_err(|e| HarnessError::Report(e.to_string()))?;
    write_file(&report_path, json.as_bytes())?;
    written.push(report_path);

    for artifact in &report.pipelines {
        let path = outdir
            .join("pipelines")
            .join(format!("run{}_fold{}.json", artifact.run, artifact.fold));
        let json = serde_json::to_string_pretty(artifact)
            .map_err(|e| HarnessError::Report(e.to_string()))?;
        write_file(&path, json.as_bytes())?;
        written.push(path);
    }

    let mut histogram: BTreeMap<&str, usize> = DrMode::ALL.iter().map(|m| (m.label(), 0)).collect();
    for record in &report.records {
        if let Some(metrics) = &record.metrics {
            *histogram.get_mut(metrics.dr_mode.label()).unwrap() += 1;
        }
    }
    let mut csv = String::from("dr_mode,count\n");
    for mode in DrMode::ALL {
        csv.push_str(&format!("{},{}\n", mode.label(), histogram[mode.label()]));
    }
    let path = outdir.join("dr_histogram.csv");
    write_file(&path, csv.as_bytes())?;
    written.push(path);

    let mut csv = String::from("run,fold,evaluations,restarts\n");
    for record in &report.records {
        if let Some(m) = &record.metrics {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                record.run, record.fold, m.evaluations, m.restarts
            ));
        }
    }
    let path = outdir.join("evaluations.csv");
    write_file(&path, csv.as_bytes())?;
    written.push(path);

    for (run, fold, history) in &report.histories {
        let mut csv = String::from("generation,best_fitness,mean_fitness,restarts,evaluations\n");
        for stat in history {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                stat.generation,
                fmt6(stat.best_fitness),
                fmt6(stat.mean_fitness),
                stat.restarts,
                stat.evaluations
            ));
        }
        let path = outdir
            .join("history")
            .join(format!("run{run}_fold{fold}.csv"));
        write_file(&path, csv.as_bytes())?;
        written.push(path);
    }

    let mut csv = String::from("run,fold,wall_time_seconds\n");
    for (run, fold, seconds) in &report.wall_times {
        csv.push_str(&format!("{run},{fold},{seconds:.3}\n"));
    }
    let path = outdir.join("timings.csv");
    write_file(&path, csv.as_bytes())?;
    written.push(path);

    let path = outdir.join("summary.md");
    write_file(&path, summary_markdown(report).as_bytes())?;
    written.push(path);

    Ok(written)
}

fn summary_markdown(report: &RunReport) -> String {
    let a = &report.aggregates;
    let fmt = |m: &MeanStd| format!("{} ± {}", fmt6(m.mean), fmt6(m.std));
    let mut out = String::new();
    out.push_str("# Experiment summary\n\n");
    let searcher = match report.config.searcher {
        Searcher::Edca => "edca",
        Searcher::Random => "random",
    };
    out.push_str(&format!(
        "- searcher: {}\n- runs: {}\n- records: {}\n- seed: {}\n\n",
        searcher,
        report.config.n_runs,
        report.records.len(),
        report.environment.seed
    ));
    out.push_str("| Metric | Mean ± Std |\n|---|---|\n");
    out.push_str(&format!("| Test MCC | {} |\n", fmt(&a.test_mcc)));
    if let Some(retrained) = &a.retrained_mcc {
        out.push_str(&format!(
            "| Test MCC (retrained on all data) | {} |\n",
            fmt(retrained)
        ));
    }
    out.push_str(&format!("| Best fitness | {} |\n", fmt(&a.best_fitness)));
    out.push_str(&format!("| % data | {} |\n", fmt(&a.pct_data)));
    out.push_str(&format!("| % instances | {} |\n", fmt(&a.pct_instances)));
    out.push_str(&format!("| % features | {} |\n", fmt(&a.pct_features)));
    out.push_str(&format!("| Evaluations | {} |\n", fmt(&a.evaluations)));
    out.push_str(&format!("| Restarts | {} |\n", fmt(&a.restarts)));
    out.push_str("\n| DR technique | Count |\n|---|---|\n");
    let mut histogram: BTreeMap<&str, usize> = DrMode::ALL.iter().map(|m| (m.label(), 0)).collect();
    for record in &report.records {
        if let Some(m) = &record.metrics {
            *histogram.get_mut(m.dr_mode.label()).unwrap() += 1;
        }
    }
    for mode in DrMode::ALL {
        out.push_str(&format!(
            "| {} | {} |\n",
            mode.label(),
            histogram[mode.label()]
        ));
    }
    out
}
