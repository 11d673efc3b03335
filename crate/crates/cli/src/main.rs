//! `edca` — pipeline search for tabular classification from the command
//! line.
//!
//! Exit codes: 0 success, 1 config error, 2 data error, 3 search failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use edca_core::harness::{emit_reports, run_experiment, RunConfig};
use edca_core::{
    analyze, generate_synthetic, load_csv, write_csv, ConfusionMatrix, FittedPipeline,
    HarnessError, SearchSpaceConfig, SynthSpec, DEFAULT_MISSING_TOKENS,
};

#[derive(Parser)]
#[command(
    name = "edca",
    version,
    about = "Evolutionary data-centric pipeline search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV dataset: column kinds and the derived pipeline blueprint.
    Analyze {
        /// CSV file with a header row.
        #[arg(long)]
        data: PathBuf,
        /// Name of the target column.
        #[arg(long)]
        target: String,
        /// Token treated as missing (repeatable). Defaults to "", "?", "NA".
        #[arg(long = "missing-token")]
        missing_tokens: Vec<String>,
    },
    /// Run a config-driven experiment and write reports.
    Search {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the evaluation budget (reproducible stop criterion).
        #[arg(long = "max-evals")]
        max_evals: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// What retraining on all data regrows.
        #[arg(long = "retrain-all-mode", value_parser = ["instances", "both"])]
        retrain_all_mode: Option<String>,
    },
    /// Score a saved pipeline against a labeled CSV dataset.
    Evaluate {
        /// Pipeline JSON written by `search`.
        #[arg(long)]
        pipeline: PathBuf,
        /// CSV file with the same schema as the training data.
        #[arg(long)]
        data: PathBuf,
    },
    /// Generate a synthetic dataset and write it as CSV.
    Synth {
        /// JSON synthetic-data spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Generation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum CliError {
    Config(String),
    Data(String),
    Search(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Search(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Search(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(m) => CliError::Config(m),
            HarnessError::Data(d) => CliError::Data(d.to_string()),
            HarnessError::Search(s) => CliError::Search(s.to_string()),
            HarnessError::Report(m) => CliError::Search(m),
        }
    }
}

fn default_missing_tokens() -> Vec<String> {
    DEFAULT_MISSING_TOKENS
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn cmd_analyze(data: &PathBuf, target: &str, missing: Vec<String>) -> Result<(), CliError> {
    let tokens = if missing.is_empty() {
        default_missing_tokens()
    } else {
        missing
    };
    let ds = load_csv(data, target, &tokens).map_err(|e| CliError::Data(e.to_string()))?;
    let (profiles, blueprint) =
        analyze(&ds, &SearchSpaceConfig::default()).map_err(|e| CliError::Data(e.to_string()))?;
    let out = serde_json::json!({
        "columns": profiles,
        "steps": blueprint.steps,
        "max_instances": blueprint.max_instances,
        "max_features": blueprint.max_features,
        "class_count": blueprint.class_count,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("profile serializes")
    );
    Ok(())
}

fn cmd_search(
    config_path: &PathBuf,
    seed: Option<u64>,
    max_evals: Option<usize>,
    output: Option<PathBuf>,
    retrain_all_mode: Option<String>,
) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", config_path.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Config(format!("parse {}: {e}", config_path.display())))?;

    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(max) = max_evals {
        cfg.ga.max_evaluations = Some(max);
    }
    if let Some(mode) = retrain_all_mode {
        cfg.retrain_all = true;
        cfg.retrain_mode = match mode.as_str() {
            "both" => edca_core::RetrainMode::Both,
            _ => edca_core::RetrainMode::Instances,
        };
    }
    if let Ok(workers) = std::env::var("EDCA_WORKERS") {
        let workers: usize = workers
            .parse()
            .map_err(|_| CliError::Config(format!("EDCA_WORKERS={workers} is not a number")))?;
        cfg.ga.parallel_jobs = workers.max(1);
    }

    let outdir = output
        .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("edca_out"));

    let report = run_experiment(&cfg)?;
    let written = emit_reports(&report, &outdir)?;
    let failures = report
        .records
        .iter()
        .filter(|r| r.failure.is_some())
        .count();
    println!(
        "wrote {} files to {} ({} records, {} failures)",
        written.len(),
        outdir.display(),
        report.records.len(),
        failures
    );
    println!(
        "test MCC {} ± {} | data used {} ± {}",
        report.aggregates.test_mcc.mean,
        report.aggregates.test_mcc.std,
        report.aggregates.pct_data.mean,
        report.aggregates.pct_data.std
    );
    Ok(())
}

fn cmd_evaluate(pipeline_path: &PathBuf, data: &PathBuf) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(pipeline_path)
        .map_err(|e| CliError::Data(format!("read {}: {e}", pipeline_path.display())))?;
    // Accept either a bare pipeline or the artifact wrapper written by
    // `search`.
    let pipeline: FittedPipeline = match serde_json::from_str::<FittedPipeline>(&raw) {
        Ok(p) => p,
        Err(_) => serde_json::from_str::<serde_json::Value>(&raw)
            .ok()
            .and_then(|v| v.get("pipeline").cloned())
            .and_then(|p| serde_json::from_value(p).ok())
            .ok_or_else(|| {
                CliError::Data(format!(
                    "{} is not a pipeline file",
                    pipeline_path.display()
                ))
            })?,
    };

    let ds = load_csv(
        data,
        &pipeline.schema.target_name,
        &default_missing_tokens(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    // Remap labels onto the training indexing.
    let mut y_true = Vec::with_capacity(ds.n_rows());
    for row in 0..ds.n_rows() {
        let name = &ds.label_names[ds.target[row]];
        match pipeline.schema.label_names.iter().position(|l| l == name) {
            Some(idx) => y_true.push(idx),
            None => {
                return Err(CliError::Data(format!(
                    "label {name:?} was never seen during training"
                )))
            }
        }
    }
    let preds = pipeline
        .predict(&ds)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let cm = ConfusionMatrix::from_labels(&y_true, &preds, pipeline.schema.class_count);
    let out = serde_json::json!({
        "rows": ds.n_rows(),
        "model": pipeline.model_method,
        "mcc": edca_core::mcc(&cm),
        "accuracy": cm.accuracy(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("score serializes")
    );
    Ok(())
}

fn cmd_synth(spec_path: &PathBuf, out: &PathBuf, seed: u64) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::Config(format!("read {}: {e}", spec_path.display())))?;
    let spec: SynthSpec = serde_json::from_str(&raw)
        .map_err(|e| CliError::Config(format!("parse {}: {e}", spec_path.display())))?;
    let ds = generate_synthetic(&spec, seed).map_err(|e| CliError::Data(e.to_string()))?;
    write_csv(&ds, out).map_err(|e| CliError::Data(e.to_string()))?;
    println!(
        "wrote {} rows x {} feature columns to {}",
        ds.n_rows(),
        ds.columns.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze {
            data,
            target,
            missing_tokens,
        } => cmd_analyze(&data, &target, missing_tokens),
        Command::Search {
            config,
            seed,
            max_evals,
            output,
            retrain_all_mode,
        } => cmd_search(&config, seed, max_evals, output, retrain_all_mode),
        Command::Evaluate { pipeline, data } => cmd_evaluate(&pipeline, &data),
        Command::Synth { spec, out, seed } => cmd_synth(&spec, &out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
