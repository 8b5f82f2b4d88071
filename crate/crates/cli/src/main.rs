//! Command-line runner for the wind speed regression benchmark.
//!
//! Verbs: `prepare`, `train`, `evaluate`, `reproduce`, `synth-data`.
//! Settings come from an optional JSON config file; command-line flags
//! override its fields. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 training/evaluation failure, 4 unmet acceptance assertion.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use anemo::data::SplitMode;
use anemo::model::ModelKind;
use anemo::pipeline::{
    cmd_evaluate, cmd_prepare, cmd_train, load_prepared, load_train_outcome, EvalOutcome,
    HyperParams, PipelineError, Profile, RunConfig, TrainOutcome,
};
use anemo::report::ReportRow;
use anemo::synth::{write_files, SynthConfig, SynthError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRAIN: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "anemo", version, about = "Hourly wind speed regression benchmark")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse the raw CSV, aggregate to hours, split, and standardize
    Prepare(CommonOpts),
    /// Fit the selected models on a prepared output directory
    Train(CommonOpts),
    /// Score fitted models on the held-out split and write the reports
    Evaluate(CommonOpts),
    /// prepare + train + evaluate in one deterministic run
    Reproduce(ReproduceOpts),
    /// Generate the bundled synthetic dataset and its column mapping
    SynthData(SynthOpts),
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON run-config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hyperparameter preset: table1, table1-prose, synthetic
    #[arg(long)]
    profile: Option<String>,
    /// Comma-separated roster subset, by number (1-12) or slug
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Master seed for split, ensembles, and network init
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for model training
    #[arg(long)]
    jobs: Option<usize>,
    /// Input data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    /// Column-mapping JSON for the input CSV
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Training fraction in (0, 1)
    #[arg(long)]
    ratio: Option<f64>,
    /// Split chronologically instead of shuffling
    #[arg(long)]
    chronological: bool,
    /// Suppress progress lines on stderr
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ReproduceOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Acceptance assertion `<model>=<min R²>`, repeatable; any unmet
    /// assertion turns the exit code to 4
    #[arg(long = "require", value_name = "MODEL=R2")]
    require: Vec<String>,
}

#[derive(Args)]
struct SynthOpts {
    /// Directory for data.csv and mapping.json
    #[arg(long, default_value = "synth")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2208)]
    hours: usize,
    #[arg(long, default_value_t = 17)]
    features: usize,
    /// Noise std as a fraction of the signal std
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

/// On-disk config file. Every field is optional; flags win over fields,
/// and an explicit `hyper` block wins over `profile`.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data_csv: Option<PathBuf>,
    mapping_json: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    seed: Option<u64>,
    train_ratio: Option<f64>,
    split_mode: Option<SplitMode>,
    models: Option<Vec<String>>,
    profile: Option<String>,
    hyper: Option<HyperParams>,
    jobs: Option<usize>,
}

struct Failure {
    message: String,
    code: u8,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            message: message.into(),
            code: EXIT_USAGE,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Failure {
        let code = match &e {
            PipelineError::Data(_) | PipelineError::BadArtifact(_) | PipelineError::Io(_) => {
                EXIT_DATA
            }
            PipelineError::BadConfig(_) => EXIT_USAGE,
            _ => EXIT_TRAIN,
        };
        Failure {
            message: e.to_string(),
            code,
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Failure {
        let code = match &e {
            SynthError::Io(_) => EXIT_DATA,
            _ => EXIT_USAGE,
        };
        Failure {
            message: e.to_string(),
            code,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                0
            } else {
                EXIT_USAGE
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Prepare(opts) => {
            let config = resolve(&opts)?;
            let prepared = cmd_prepare(&config)?;
            println!(
                "prepared {} rows ({} dropped) into {}",
                prepared.dataset.n(),
                prepared.dropped,
                config.out_dir.display()
            );
            Ok(0)
        }
        Cmd::Train(opts) => {
            let config = resolve(&opts)?;
            let prepared = load_prepared(&config)?;
            let outcome = cmd_train(&config, &prepared.train_std)?;
            let failed = print_train_summary(&outcome);
            Ok(if failed { EXIT_TRAIN } else { 0 })
        }
        Cmd::Evaluate(opts) => {
            let config = resolve(&opts)?;
            let prepared = load_prepared(&config)?;
            let outcome = load_train_outcome(&config)?;
            if outcome.models.iter().all(|m| m.fitted.is_none()) {
                return Err(Failure {
                    message: "no fitted models to evaluate".into(),
                    code: EXIT_TRAIN,
                });
            }
            let start = Instant::now();
            let eval = cmd_evaluate(&config, &prepared, &outcome)?;
            write_run_report(
                &config,
                &eval,
                &outcome,
                prepared.split.test.n(),
                [0.0, 0.0, start.elapsed().as_secs_f64()],
            )?;
            print_rows(&eval.rows);
            Ok(0)
        }
        Cmd::Reproduce(opts) => {
            let assertions = parse_assertions(&opts.require)?;
            let config = resolve(&opts.common)?;
            let t0 = Instant::now();
            let prepared = cmd_prepare(&config)?;
            let prepare_s = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let outcome = cmd_train(&config, &prepared.train_std)?;
            let train_s = t1.elapsed().as_secs_f64();
            let t2 = Instant::now();
            let eval = cmd_evaluate(&config, &prepared, &outcome)?;
            let eval_s = t2.elapsed().as_secs_f64();
            write_run_report(
                &config,
                &eval,
                &outcome,
                prepared.split.test.n(),
                [prepare_s, train_s, eval_s],
            )?;
            print_rows(&eval.rows);
            if !eval.failures.is_empty() {
                for (kind, error) in &eval.failures {
                    eprintln!("{} failed: {}", kind.slug(), error);
                }
                return Ok(EXIT_TRAIN);
            }
            for (kind, min_r2) in &assertions {
                let row = eval.rows.iter().find(|r| r.model_number == kind.number());
                let met = row.and_then(|r| r.r2).is_some_and(|r2| r2 >= *min_r2);
                if !met {
                    eprintln!(
                        "assertion failed: {} R² {} < required {}",
                        kind.slug(),
                        row.and_then(|r| r.r2)
                            .map_or("n/a".to_string(), |v| format!("{:.4}", v)),
                        min_r2
                    );
                    return Ok(EXIT_ACCEPTANCE);
                }
            }
            Ok(0)
        }
        Cmd::SynthData(opts) => {
            let config = SynthConfig {
                n_hours: opts.hours,
                n_features: opts.features,
                seed: opts.seed,
                noise: opts.noise,
            };
            let (csv, mapping) = write_files(&opts.out, &config)?;
            println!("wrote {} and {}", csv.display(), mapping.display());
            Ok(0)
        }
    }
}

/// Builds the effective [`RunConfig`]: defaults ← profile ← config file
/// ← flags.
fn resolve(opts: &CommonOpts) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::new(PathBuf::new(), PathBuf::new(), PathBuf::from("out"));

    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure {
            message: format!("cannot read config {}: {}", path.display(), e),
            code: EXIT_DATA,
        })?;
        let file: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("bad config {}: {}", path.display(), e)))?;
        if let Some(profile) = &file.profile {
            config.hyper = Profile::parse(profile)?.hyper();
        }
        if let Some(hyper) = file.hyper {
            config.hyper = hyper;
        }
        if let Some(v) = file.data_csv {
            config.data_csv = v;
        }
        if let Some(v) = file.mapping_json {
            config.mapping_json = v;
        }
        if let Some(v) = file.out_dir {
            config.out_dir = v;
        }
        if let Some(v) = file.seed {
            config.seed = v;
        }
        if let Some(v) = file.train_ratio {
            config.train_ratio = v;
        }
        if let Some(v) = file.split_mode {
            config.split_mode = v;
        }
        if let Some(v) = file.jobs {
            config.jobs = v;
        }
        if let Some(models) = file.models {
            config.models = parse_models(&models)?;
        }
    }

    if let Some(profile) = &opts.profile {
        config.hyper = Profile::parse(profile)?.hyper();
    }
    if let Some(models) = &opts.models {
        config.models = parse_models(models)?;
    }
    if let Some(v) = opts.seed {
        config.seed = v;
    }
    if let Some(v) = &opts.out {
        config.out_dir = v.clone();
    }
    if let Some(v) = opts.jobs {
        config.jobs = v;
    }
    if let Some(v) = &opts.data {
        config.data_csv = v.clone();
    }
    if let Some(v) = &opts.mapping {
        config.mapping_json = v.clone();
    }
    if let Some(v) = opts.ratio {
        config.train_ratio = v;
    }
    if opts.chronological {
        config.split_mode = SplitMode::Chronological;
    }
    config.verbose = !opts.quiet;
    Ok(config)
}

fn parse_models(tokens: &[String]) -> Result<Vec<ModelKind>, Failure> {
    if tokens.is_empty() {
        return Err(Failure::usage("empty model list"));
    }
    tokens
        .iter()
        .map(|t| ModelKind::parse(t.trim()).map_err(|e| Failure::usage(e.to_string())))
        .collect()
}

fn parse_assertions(tokens: &[String]) -> Result<Vec<(ModelKind, f64)>, Failure> {
    tokens
        .iter()
        .map(|t| {
            let (model, threshold) = t
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("bad assertion {:?}, want MODEL=R2", t)))?;
            let kind = ModelKind::parse(model.trim())
                .map_err(|e| Failure::usage(e.to_string()))?;
            let min_r2: f64 = threshold
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("bad R² threshold {:?}", threshold)))?;
            Ok((kind, min_r2))
        })
        .collect()
}

fn print_train_summary(outcome: &TrainOutcome) -> bool {
    let mut failed = false;
    for model in &outcome.models {
        match &model.error {
            Some(error) => {
                failed = true;
                println!(
                    "model {:>2} {:<14} FAILED: {}",
                    model.kind.number(),
                    model.kind.slug(),
                    error
                );
            }
            None => println!(
                "model {:>2} {:<14} trained in {:.1}s",
                model.kind.number(),
                model.kind.slug(),
                model.seconds
            ),
        }
    }
    failed
}

fn print_rows(rows: &[ReportRow]) {
    for row in rows {
        println!(
            "model {:>2}  {:<34} MAE {:>8.3}  MSE {:>8.3}  MedAE {:>8.3}  R² {}",
            row.model_number,
            row.algorithm,
            row.mae,
            row.mse,
            row.medae,
            row.r2.map_or("   n/a".to_string(), |v| format!("{:>6.3}", v)),
        );
    }
}

/// Run-level record: metrics, timings, seed, config hash, and the
/// artifact paths each model produced.
#[derive(Serialize)]
struct RunReport {
    seed: u64,
    config_hash: String,
    phase_seconds: PhaseSeconds,
    models: Vec<ModelReport>,
    failures: Vec<FailureReport>,
}

#[derive(Serialize)]
struct PhaseSeconds {
    prepare: f64,
    train: f64,
    evaluate: f64,
}

#[derive(Serialize)]
struct ModelReport {
    number: usize,
    model: String,
    algorithm: String,
    n_test: usize,
    mae: f64,
    mse: f64,
    medae: f64,
    r2: Option<f64>,
    notes: Vec<String>,
    train_seconds: f64,
    artifacts: Vec<String>,
}

#[derive(Serialize)]
struct FailureReport {
    model: String,
    error: String,
}

fn write_run_report(
    config: &RunConfig,
    eval: &EvalOutcome,
    outcome: &TrainOutcome,
    n_test: usize,
    [prepare, train, evaluate]: [f64; 3],
) -> Result<(), Failure> {
    let config_json = serde_json::to_string(config).expect("config serializes");
    let models = eval
        .rows
        .iter()
        .map(|row| {
            let kind = ModelKind::from_number(row.model_number).expect("report rows are roster rows");
            let seconds = outcome
                .models
                .iter()
                .find(|m| m.kind == kind)
                .map_or(0.0, |m| m.seconds);
            ModelReport {
                number: row.model_number,
                model: kind.slug().to_string(),
                algorithm: row.algorithm.clone(),
                n_test,
                mae: row.mae,
                mse: row.mse,
                medae: row.medae,
                r2: row.r2,
                notes: row.notes.clone(),
                train_seconds: seconds,
                artifacts: artifact_paths(kind),
            }
        })
        .collect();
    let report = RunReport {
        seed: config.seed,
        config_hash: format!("{:016x}", fnv1a64(config_json.as_bytes())),
        phase_seconds: PhaseSeconds {
            prepare,
            train,
            evaluate,
        },
        models,
        failures: eval
            .failures
            .iter()
            .map(|(kind, error)| FailureReport {
                model: kind.slug().to_string(),
                error: error.clone(),
            })
            .collect(),
    };
    std::fs::write(
        config.out_dir.join("run_report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(|e| Failure {
        message: format!("cannot write run report: {}", e),
        code: EXIT_DATA,
    })?;
    Ok(())
}

fn artifact_paths(kind: ModelKind) -> Vec<String> {
    let slug = kind.slug();
    let mut paths = if kind.is_neural() {
        vec![
            format!("models/{}.manifest.json", slug),
            format!("models/{}.tensors.bin", slug),
            format!("traces/{}_epochs.csv", slug),
            format!("plots/{}_epoch_loss.svg", slug),
        ]
    } else {
        vec![format!("models/{}.json", slug)]
    };
    paths.push(format!("metrics/{}.json", slug));
    paths.push(format!("plots/{}_residual.svg", slug));
    paths.push(format!("plots/{}_prediction_qq.svg", slug));
    paths
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
