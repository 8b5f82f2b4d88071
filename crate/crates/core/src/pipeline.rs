//! End-to-end benchmark orchestration: prepare → train → evaluate, each
//! stage writing deterministic artifacts under one output directory so a
//! whole run reproduces byte-for-byte from (input CSV, mapping, config).
//!
//! Layout under `out_dir`:
//! - `dataset.csv`, `prepare.json` — complete hourly data plus the split
//!   indices and standardizer that define the experiment;
//! - `models/`, `traces/`, `train.json` — fitted models, epoch traces,
//!   and per-model status;
//! - `report.csv`, `report.md`, `plots/` — test metrics and diagnostics.
//!
//! Every model trains independently: one failure is recorded and the rest
//! of the lineup still reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{
    aggregate_hourly, build_dataset, parse_csv, split, ColumnMapping, DataError, Dataset,
    Split, SplitMode, Standardizer, TARGET_NAME,
};
use crate::diagnostics::{
    chi2_qq_series, epoch_loss_series, prediction_qq_series, residual_series, Chi2QqReport,
    DiagnosticsError, PlotSeries,
};
use crate::linalg::Matrix;
use crate::linear::{
    fit_bayesian_ridge, fit_huber, fit_lasso, fit_ols, fit_ridge, BayesianRidgeConfig,
    Convergence, HuberConfig, LassoConfig, LinearError,
};
use crate::metrics::{MetricsError, MetricsReport};
use crate::model::{shape_samples, FittedModel, ModelError, ModelKind, TargetScaler};
use crate::neural::{
    build_cnn, build_lstm, build_mlp, train, EpochTrace, NeuralError, Optimizer, TrainConfig,
};
use crate::report::{epoch_trace_csv, to_csv, to_markdown, ReportRow};
use crate::svg::{render_svg, series_to_csv};
use crate::svr::{fit_svr, rbf_gamma_scale, Kernel, SvrConfig, SvrError};
use crate::tree::{
    fit_adaboost, fit_bagging, fit_random_forest, fit_tree, AdaBoost, AdaBoostConfig,
    ForestConfig, TreeError,
};

#[derive(Debug)]
pub enum PipelineError {
    Data(DataError),
    Linear(LinearError),
    Tree(TreeError),
    Svr(SvrError),
    Neural(NeuralError),
    Model(ModelError),
    Metrics(MetricsError),
    Diagnostics(DiagnosticsError),
    Io(std::io::Error),
    BadConfig(String),
    /// A previously written artifact is missing or inconsistent.
    BadArtifact(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Data(e) => write!(f, "data: {}", e),
            PipelineError::Linear(e) => write!(f, "linear model: {}", e),
            PipelineError::Tree(e) => write!(f, "tree ensemble: {}", e),
            PipelineError::Svr(e) => write!(f, "svr: {}", e),
            PipelineError::Neural(e) => write!(f, "network: {}", e),
            PipelineError::Model(e) => write!(f, "model store: {}", e),
            PipelineError::Metrics(e) => write!(f, "metrics: {}", e),
            PipelineError::Diagnostics(e) => write!(f, "diagnostics: {}", e),
            PipelineError::Io(e) => write!(f, "io: {}", e),
            PipelineError::BadConfig(msg) => write!(f, "invalid run config: {}", msg),
            PipelineError::BadArtifact(msg) => write!(f, "invalid artifact: {}", msg),
        }
    }
}

impl std::error::Error for PipelineError {}

macro_rules! from_err {
    ($variant:ident, $ty:ty) => {
        impl From<$ty> for PipelineError {
            fn from(e: $ty) -> Self {
                PipelineError::$variant(e)
            }
        }
    };
}

from_err!(Data, DataError);
from_err!(Linear, LinearError);
from_err!(Tree, TreeError);
from_err!(Svr, SvrError);
from_err!(Neural, NeuralError);
from_err!(Model, ModelError);
from_err!(Metrics, MetricsError);
from_err!(Diagnostics, DiagnosticsError);
from_err!(Io, std::io::Error);

/// Hyperparameters for the whole lineup, resolved from a [`Profile`].
/// Deserializes with per-field defaults so partial JSON blocks work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub ridge_alpha: f64,
    pub lasso_alpha: f64,
    pub huber_delta: f64,
    /// Trees per bagging/random-forest ensemble.
    pub n_trees: usize,
    pub adaboost_stages: usize,
    pub adaboost_depth: usize,
    pub svr_c: f64,
    pub svr_epsilon: f64,
    /// None resolves to 1/(d·Var(X)) on the training matrix.
    pub svr_gamma: Option<f64>,
    pub mlp_depth: usize,
    pub mlp_width: usize,
    pub cnn_filters: usize,
    pub cnn_kernel: usize,
    pub cnn_pool: usize,
    pub cnn_dense: usize,
    pub lstm_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            ridge_alpha: 0.01,
            lasso_alpha: 0.01,
            huber_delta: 1.35,
            n_trees: 100,
            adaboost_stages: 100,
            adaboost_depth: 3,
            svr_c: 1.0,
            svr_epsilon: 0.1,
            svr_gamma: None,
            mlp_depth: 13,
            mlp_width: 32,
            cnn_filters: 64,
            cnn_kernel: 2,
            cnn_pool: 2,
            cnn_dense: 50,
            lstm_hidden: 50,
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
        }
    }
}

impl HyperParams {
    fn validate(&self) -> Result<(), PipelineError> {
        let counts = [
            (self.n_trees, "n_trees"),
            (self.adaboost_stages, "adaboost_stages"),
            (self.adaboost_depth, "adaboost_depth"),
            (self.mlp_width, "mlp_width"),
            (self.cnn_filters, "cnn_filters"),
            (self.cnn_kernel, "cnn_kernel"),
            (self.cnn_pool, "cnn_pool"),
            (self.cnn_dense, "cnn_dense"),
            (self.lstm_hidden, "lstm_hidden"),
            (self.epochs, "epochs"),
            (self.batch_size, "batch_size"),
        ];
        for (v, name) in counts {
            if v == 0 {
                return Err(PipelineError::BadConfig(format!("{} must be positive", name)));
            }
        }
        if !(self.svr_c > 0.0) {
            return Err(PipelineError::BadConfig("svr_c must be positive".into()));
        }
        if !(self.svr_epsilon >= 0.0) {
            return Err(PipelineError::BadConfig("svr_epsilon must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(PipelineError::BadConfig("learning_rate must be positive".into()));
        }
        if !(self.ridge_alpha >= 0.0) || !(self.lasso_alpha >= 0.0) {
            return Err(PipelineError::BadConfig("penalties must be non-negative".into()));
        }
        if !(self.huber_delta > 0.0) {
            return Err(PipelineError::BadConfig("huber_delta must be positive".into()));
        }
        Ok(())
    }
}

/// Named hyperparameter presets. The two `table1` variants differ only in
/// the linear shrinkage strengths, the two settings in circulation for
/// this comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Table1,
    Table1Prose,
    Synthetic,
}

impl Profile {
    pub fn parse(token: &str) -> Result<Profile, PipelineError> {
        match token {
            "table1" => Ok(Profile::Table1),
            "table1-prose" => Ok(Profile::Table1Prose),
            "synthetic" => Ok(Profile::Synthetic),
            other => Err(PipelineError::BadConfig(format!(
                "unknown profile {:?} (expected table1, table1-prose, or synthetic)",
                other
            ))),
        }
    }

    pub fn hyper(self) -> HyperParams {
        match self {
            Profile::Table1 | Profile::Synthetic => HyperParams::default(),
            Profile::Table1Prose => HyperParams {
                ridge_alpha: 15.0,
                lasso_alpha: 0.1,
                ..HyperParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data_csv: PathBuf,
    pub mapping_json: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub train_ratio: f64,
    pub split_mode: SplitMode,
    /// Roster subset to run, in any order; reports always sort by number.
    pub models: Vec<ModelKind>,
    pub hyper: HyperParams,
    /// Worker threads for model training.
    pub jobs: usize,
    /// Progress lines on stderr. Artifacts are unaffected.
    pub verbose: bool,
}

impl RunConfig {
    pub fn new(data_csv: PathBuf, mapping_json: PathBuf, out_dir: PathBuf) -> RunConfig {
        RunConfig {
            data_csv,
            mapping_json,
            out_dir,
            seed: 7,
            train_ratio: 0.8,
            split_mode: SplitMode::Random,
            models: ModelKind::all().to_vec(),
            hyper: HyperParams::default(),
            jobs: 1,
            verbose: false,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if self.models.is_empty() {
            return Err(PipelineError::BadConfig("no models selected".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(PipelineError::BadConfig(format!(
                "train ratio {} outside (0, 1)",
                self.train_ratio
            )));
        }
        if self.jobs == 0 {
            return Err(PipelineError::BadConfig("jobs must be at least 1".into()));
        }
        self.hyper.validate()
    }
}

/// Everything later stages need, in memory: the complete hourly dataset,
/// the split, and the train-fitted standardizer with both transformed
/// sides.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub split: Split,
    pub standardizer: Standardizer,
    pub train_std: Dataset,
    pub test_std: Dataset,
    pub dropped: usize,
}

#[derive(Serialize, Deserialize)]
struct PrepareManifest {
    seed: u64,
    train_ratio: f64,
    split_mode: SplitMode,
    dropped_rows: usize,
    feature_names: Vec<String>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    standardizer: Standardizer,
}

/// Parses, aggregates, drops incomplete rows, splits, and standardizes.
/// Writes `dataset.csv`, `prepare.json`, and `run_config.json`.
pub fn cmd_prepare(config: &RunConfig) -> Result<Prepared, PipelineError> {
    config.validate()?;
    let mapping = ColumnMapping::from_json_file(&config.mapping_json)?;
    let raw = parse_csv(&config.data_csv, &mapping)?;
    let hourly = aggregate_hourly(&raw, &mapping)?;
    let (dataset, dropped) = build_dataset(&hourly, &mapping)?;
    let split = split(&dataset, config.train_ratio, config.seed, config.split_mode)?;
    let standardizer = Standardizer::fit(&split.train);
    let train_std = standardizer.transform(&split.train);
    let test_std = standardizer.transform(&split.test);

    fs::create_dir_all(&config.out_dir)?;
    fs::write(config.out_dir.join("dataset.csv"), dataset_csv(&dataset))?;
    let manifest = PrepareManifest {
        seed: config.seed,
        train_ratio: config.train_ratio,
        split_mode: config.split_mode,
        dropped_rows: dropped,
        feature_names: dataset.feature_names.clone(),
        train_idx: split.train_idx.clone(),
        test_idx: split.test_idx.clone(),
        standardizer: standardizer.clone(),
    };
    fs::write(
        config.out_dir.join("prepare.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    fs::write(
        config.out_dir.join("run_config.json"),
        serde_json::to_string_pretty(config).expect("config serializes"),
    )?;
    if config.verbose {
        eprintln!(
            "prepared {} hourly rows ({} dropped), {} train / {} test",
            dataset.n(),
            dropped,
            split.train.n(),
            split.test.n()
        );
    }

    Ok(Prepared {
        dataset,
        split,
        standardizer,
        train_std,
        test_std,
        dropped,
    })
}

fn dataset_csv(ds: &Dataset) -> String {
    let mut out = ds.feature_names.join(",");
    out.push(',');
    out.push_str(TARGET_NAME);
    out.push('\n');
    for i in 0..ds.n() {
        for (j, v) in ds.x.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", v));
        }
        out.push_str(&format!(",{}\n", ds.y[i]));
    }
    out
}

/// Rebuilds [`Prepared`] from `dataset.csv` + `prepare.json` without
/// refitting anything, so downstream stages can run in a fresh process.
pub fn load_prepared(config: &RunConfig) -> Result<Prepared, PipelineError> {
    let manifest_path = config.out_dir.join("prepare.json");
    let manifest: PrepareManifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .map_err(|e| PipelineError::BadArtifact(format!("{}: {}", manifest_path.display(), e)))?,
    )
    .map_err(|e| PipelineError::BadArtifact(format!("prepare.json: {}", e)))?;

    let csv_path = config.out_dir.join("dataset.csv");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)
        .map_err(|e| PipelineError::BadArtifact(format!("{}: {}", csv_path.display(), e)))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| PipelineError::BadArtifact(e.to_string()))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let expected: Vec<String> = manifest
        .feature_names
        .iter()
        .cloned()
        .chain(std::iter::once(TARGET_NAME.to_string()))
        .collect();
    if headers != expected {
        return Err(PipelineError::BadArtifact(
            "dataset.csv header does not match prepare.json feature names".into(),
        ));
    }

    let d = manifest.feature_names.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| PipelineError::BadArtifact(e.to_string()))?;
        let mut vals = Vec::with_capacity(d + 1);
        for cell in record.iter() {
            vals.push(cell.parse::<f64>().map_err(|_| {
                PipelineError::BadArtifact(format!("non-numeric cell {:?} in dataset.csv", cell))
            })?);
        }
        if vals.len() != d + 1 {
            return Err(PipelineError::BadArtifact("short row in dataset.csv".into()));
        }
        y.push(vals[d]);
        vals.truncate(d);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(PipelineError::BadArtifact("dataset.csv has no rows".into()));
    }
    let dataset = Dataset {
        x: Matrix::from_rows(&rows),
        y,
        feature_names: manifest.feature_names.clone(),
    };

    let n = dataset.n();
    let mut seen = vec![false; n];
    for &i in manifest.train_idx.iter().chain(&manifest.test_idx) {
        if i >= n || seen[i] {
            return Err(PipelineError::BadArtifact(
                "split indices do not form a partition of the dataset".into(),
            ));
        }
        seen[i] = true;
    }
    if manifest.train_idx.len() + manifest.test_idx.len() != n {
        return Err(PipelineError::BadArtifact(
            "split indices do not cover the dataset".into(),
        ));
    }
    if manifest.standardizer.mean.len() != d || manifest.standardizer.std.len() != d {
        return Err(PipelineError::BadArtifact(
            "standardizer dimension does not match the dataset".into(),
        ));
    }

    let split = Split {
        train: dataset.select_rows(&manifest.train_idx),
        test: dataset.select_rows(&manifest.test_idx),
        train_idx: manifest.train_idx,
        test_idx: manifest.test_idx,
    };
    let train_std = manifest.standardizer.transform(&split.train);
    let test_std = manifest.standardizer.transform(&split.test);
    Ok(Prepared {
        dataset,
        split,
        standardizer: manifest.standardizer,
        train_std,
        test_std,
        dropped: manifest.dropped_rows,
    })
}

/// One roster entry's training result. `fitted` and `error` are mutually
/// exclusive; notes carry caveats that belong next to the metrics.
#[derive(Debug)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub fitted: Option<FittedModel>,
    pub error: Option<String>,
    pub notes: Vec<String>,
    pub traces: Option<Vec<EpochTrace>>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// In roster order (sorted by model number).
    pub models: Vec<ModelOutcome>,
}

#[derive(Serialize, Deserialize)]
struct TrainManifestEntry {
    kind: ModelKind,
    trained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    notes: Vec<String>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stable per-model stream: reseeding one model never shifts another.
fn model_seed(base: u64, kind: ModelKind) -> u64 {
    splitmix64(base ^ ((kind.number() as u64) << 32))
}

/// Fits one roster entry on standardized features and raw targets.
/// Returns the model, report-worthy notes, and epoch traces for networks.
pub fn fit_single_model(
    kind: ModelKind,
    x: &Matrix,
    y: &[f64],
    hyper: &HyperParams,
    seed: u64,
) -> Result<(FittedModel, Vec<String>, Option<Vec<EpochTrace>>), PipelineError> {
    let mut notes = Vec::new();
    let merge = |conv: &Convergence, label: &str, mut extra: Vec<String>| {
        if !conv.converged {
            extra.push(format!("{} stopped at the {}-iteration cap", label, conv.iterations));
        }
        extra.extend(conv.notes.iter().cloned());
        extra
    };

    let fitted = match kind {
        ModelKind::Linear => {
            let (model, conv) = fit_ols(x, y)?;
            notes = merge(&conv, "least squares", notes);
            FittedModel::Linear { kind, model }
        }
        ModelKind::Ridge => {
            let (model, conv) = fit_ridge(x, y, hyper.ridge_alpha)?;
            notes = merge(&conv, "ridge", notes);
            FittedModel::Linear { kind, model }
        }
        ModelKind::Lasso => {
            let config = LassoConfig {
                alpha: hyper.lasso_alpha,
                ..LassoConfig::default()
            };
            let (model, conv) = fit_lasso(x, y, &config)?;
            notes = merge(&conv, "coordinate descent", notes);
            if model.weights.iter().all(|w| *w == 0.0) {
                notes.push("penalty zeroed every coefficient".to_string());
            }
            FittedModel::Linear { kind, model }
        }
        ModelKind::BayesianRidge => {
            let (model, _, conv) = fit_bayesian_ridge(x, y, &BayesianRidgeConfig::default())?;
            notes = merge(&conv, "evidence maximization", notes);
            FittedModel::Linear { kind, model }
        }
        ModelKind::Huber => {
            let config = HuberConfig {
                delta: hyper.huber_delta,
                ..HuberConfig::default()
            };
            let (model, conv) = fit_huber(x, y, &config)?;
            notes = merge(&conv, "IRLS", notes);
            FittedModel::Linear { kind, model }
        }
        ModelKind::Bagging => {
            let config = ForestConfig {
                n_estimators: hyper.n_trees,
                seed,
                ..ForestConfig::default()
            };
            FittedModel::Forest {
                kind,
                model: fit_bagging(x, y, &config)?,
            }
        }
        ModelKind::RandomForest => {
            let config = ForestConfig {
                n_estimators: hyper.n_trees,
                seed,
                ..ForestConfig::default()
            };
            FittedModel::Forest {
                kind,
                model: fit_random_forest(x, y, &config)?,
            }
        }
        ModelKind::AdaBoost => {
            let config = AdaBoostConfig {
                n_estimators: hyper.adaboost_stages,
                tree: crate::tree::TreeConfig {
                    max_depth: Some(hyper.adaboost_depth),
                    ..crate::tree::TreeConfig::default()
                },
                ..AdaBoostConfig::default()
            };
            match fit_adaboost(x, y, &config) {
                Ok(model) => FittedModel::AdaBoost { model },
                Err(TreeError::AllRoundsRejected) => {
                    notes.push(
                        "boosting rejected every round; fell back to a single tree".to_string(),
                    );
                    let tree = fit_tree(x, y, None, &config.tree, None)?;
                    FittedModel::AdaBoost {
                        model: AdaBoost {
                            trees: vec![tree],
                            stage_log_weights: vec![1.0],
                        },
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        ModelKind::Svr => {
            let gamma = hyper.svr_gamma.unwrap_or_else(|| rbf_gamma_scale(x));
            let config = SvrConfig {
                c: hyper.svr_c,
                epsilon: hyper.svr_epsilon,
                kernel: Kernel::Rbf { gamma },
                ..SvrConfig::default()
            };
            let fit = fit_svr(x, y, &config)?;
            if !fit.converged {
                notes.push(format!("SMO stopped at the {}-iteration cap", fit.iterations));
            }
            FittedModel::Svr { model: fit.model }
        }
        ModelKind::Dnn | ModelKind::Cnn | ModelKind::Lstm => {
            let d = x.cols();
            if kind == ModelKind::Cnn {
                let conv_out = (d + 1).saturating_sub(hyper.cnn_kernel);
                if conv_out == 0 || conv_out / hyper.cnn_pool == 0 {
                    return Err(PipelineError::BadConfig(format!(
                        "kernel {} and pool {} leave nothing of {} input features",
                        hyper.cnn_kernel, hyper.cnn_pool, d
                    )));
                }
            }
            let mut network = match kind {
                ModelKind::Dnn => build_mlp(d, hyper.mlp_depth, hyper.mlp_width, seed),
                ModelKind::Cnn => build_cnn(
                    d,
                    hyper.cnn_filters,
                    hyper.cnn_kernel,
                    hyper.cnn_pool,
                    hyper.cnn_dense,
                    seed,
                ),
                ModelKind::Lstm => build_lstm(d, hyper.lstm_hidden, seed),
                _ => unreachable!(),
            };
            let target_scaler = TargetScaler::fit(y);
            let samples = shape_samples(kind, x);
            let config = TrainConfig {
                epochs: hyper.epochs,
                batch_size: hyper.batch_size,
                optimizer: Optimizer::Adam {
                    lr: hyper.learning_rate,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                },
                shuffle_seed: splitmix64(seed),
            };
            let traces = train(&mut network, &samples, &target_scaler.encode(y), &config)?;
            return Ok((
                FittedModel::Neural {
                    kind,
                    network,
                    target_scaler,
                },
                notes,
                Some(traces),
            ));
        }
    };
    Ok((fitted, notes, None))
}

/// Trains the configured lineup, isolating per-model failures. Takes only
/// the standardized training split — test rows are unreachable from here
/// by construction. Writes `models/`, `traces/`, epoch-loss plots,
/// `train.json`.
pub fn cmd_train(config: &RunConfig, train_std: &Dataset) -> Result<TrainOutcome, PipelineError> {
    config.validate()?;
    let mut kinds = config.models.clone();
    kinds.sort_by_key(|k| k.number());
    kinds.dedup();

    let x = &train_std.x;
    let y = &train_std.y;
    let slots: Vec<Mutex<Option<ModelOutcome>>> =
        kinds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.jobs.min(kinds.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= kinds.len() {
                    break;
                }
                let kind = kinds[i];
                let start = Instant::now();
                let outcome = match fit_single_model(
                    kind,
                    x,
                    y,
                    &config.hyper,
                    model_seed(config.seed, kind),
                ) {
                    Ok((fitted, notes, traces)) => ModelOutcome {
                        kind,
                        fitted: Some(fitted),
                        error: None,
                        notes,
                        traces,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                    Err(e) => ModelOutcome {
                        kind,
                        fitted: None,
                        error: Some(e.to_string()),
                        notes: Vec::new(),
                        traces: None,
                        seconds: start.elapsed().as_secs_f64(),
                    },
                };
                if config.verbose {
                    eprintln!(
                        "model {:>2} {:<26} {}  ({:.1}s)",
                        kind.number(),
                        kind.slug(),
                        if outcome.error.is_some() { "FAILED" } else { "ok" },
                        outcome.seconds
                    );
                }
                *slots[i].lock().expect("no panics hold this lock") = Some(outcome);
            });
        }
    });

    let models: Vec<ModelOutcome> = slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("poisoned slot").expect("slot filled"))
        .collect();

    let models_dir = config.out_dir.join("models");
    let traces_dir = config.out_dir.join("traces");
    let plots_dir = config.out_dir.join("plots");
    fs::create_dir_all(&models_dir)?;
    fs::create_dir_all(&traces_dir)?;
    fs::create_dir_all(&plots_dir)?;

    let mut entries = Vec::new();
    for outcome in &models {
        if let Some(fitted) = &outcome.fitted {
            fitted.save(&models_dir)?;
        }
        if let Some(traces) = &outcome.traces {
            let slug = outcome.kind.slug();
            fs::write(
                traces_dir.join(format!("{}_epochs.csv", slug)),
                epoch_trace_csv(traces),
            )?;
            let series = epoch_loss_series(
                traces,
                &format!("Training loss — {}", outcome.kind.algorithm_name()),
            );
            fs::write(
                plots_dir.join(format!("{}_epoch_loss.svg", slug)),
                render_svg(&series),
            )?;
        }
        entries.push(TrainManifestEntry {
            kind: outcome.kind,
            trained: outcome.fitted.is_some(),
            error: outcome.error.clone(),
            notes: outcome.notes.clone(),
        });
    }
    fs::write(
        config.out_dir.join("train.json"),
        serde_json::to_string_pretty(&entries).expect("entries serialize"),
    )?;

    Ok(TrainOutcome { models })
}

/// Rebuilds a [`TrainOutcome`] from `train.json` and the saved models so
/// evaluation can run in a fresh process. Epoch traces stay on disk.
pub fn load_train_outcome(config: &RunConfig) -> Result<TrainOutcome, PipelineError> {
    let path = config.out_dir.join("train.json");
    let entries: Vec<TrainManifestEntry> = serde_json::from_str(
        &fs::read_to_string(&path)
            .map_err(|e| PipelineError::BadArtifact(format!("{}: {}", path.display(), e)))?,
    )
    .map_err(|e| PipelineError::BadArtifact(format!("train.json: {}", e)))?;

    let models_dir = config.out_dir.join("models");
    let mut models = Vec::new();
    for entry in entries {
        let fitted = if entry.trained {
            Some(FittedModel::load(&models_dir, entry.kind)?)
        } else {
            None
        };
        models.push(ModelOutcome {
            kind: entry.kind,
            fitted,
            error: entry.error,
            notes: entry.notes,
            traces: None,
            seconds: 0.0,
        });
    }
    Ok(TrainOutcome { models })
}

#[derive(Debug)]
pub struct EvalOutcome {
    /// One row per successfully trained model, in roster order.
    pub rows: Vec<ReportRow>,
    /// (kind, error) per failed model.
    pub failures: Vec<(ModelKind, String)>,
    pub chi2: Chi2QqReport,
}

/// Scores every trained model on the held-out split and writes
/// `report.csv`, `report.md`, and the diagnostic plots.
pub fn cmd_evaluate(
    config: &RunConfig,
    prepared: &Prepared,
    outcome: &TrainOutcome,
) -> Result<EvalOutcome, PipelineError> {
    let plots_dir = config.out_dir.join("plots");
    let metrics_dir = config.out_dir.join("metrics");
    fs::create_dir_all(&plots_dir)?;
    fs::create_dir_all(&metrics_dir)?;

    let y_test = &prepared.split.test.y;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for model in &outcome.models {
        let kind = model.kind;
        let fitted = match &model.fitted {
            Some(f) => f,
            None => {
                failures.push((
                    kind,
                    model.error.clone().unwrap_or_else(|| "unknown".to_string()),
                ));
                continue;
            }
        };
        let predicted = fitted.predict(&prepared.test_std.x);
        let report = MetricsReport::compute(kind.slug(), "test", y_test, &predicted)?;
        fs::write(
            metrics_dir.join(format!("{}.json", kind.slug())),
            serde_json::to_string_pretty(&report).expect("metrics serialize"),
        )?;
        let mut notes = model.notes.clone();
        if report.r2.is_none() {
            notes.push("test target variance is zero".to_string());
        }
        rows.push(ReportRow {
            model_number: kind.number(),
            algorithm: kind.algorithm_name().to_string(),
            mae: report.mae,
            mse: report.mse,
            medae: report.medae,
            r2: report.r2,
            notes,
        });

        let name = kind.algorithm_name();
        write_series(
            &plots_dir,
            &format!("{}_residual", kind.slug()),
            &residual_series(y_test, &predicted, &format!("Residuals — {}", name))?,
        )?;
        write_series(
            &plots_dir,
            &format!("{}_prediction_qq", kind.slug()),
            &prediction_qq_series(
                y_test,
                &predicted,
                &format!("Predicted vs actual — {}", name),
            )?,
        )?;
    }

    let (chi2_series, chi2) = chi2_qq_series(
        &prepared.train_std.x,
        "Mahalanobis distance² vs χ² quantiles — training features",
    )?;
    write_series(&plots_dir, "features_chi2_qq", &chi2_series)?;

    fs::write(config.out_dir.join("report.csv"), to_csv(&rows))?;
    fs::write(
        config.out_dir.join("report.md"),
        report_markdown(config, prepared, &rows, &failures, &chi2),
    )?;
    if config.verbose {
        for row in &rows {
            eprintln!(
                "model {:>2} {:<34} R² {}",
                row.model_number,
                row.algorithm,
                row.r2.map_or("n/a".to_string(), |v| format!("{:.3}", v))
            );
        }
    }
    Ok(EvalOutcome {
        rows,
        failures,
        chi2,
    })
}

fn write_series(dir: &Path, stem: &str, series: &PlotSeries) -> Result<(), PipelineError> {
    fs::write(dir.join(format!("{}.svg", stem)), render_svg(series))?;
    fs::write(dir.join(format!("{}.csv", stem)), series_to_csv(series))?;
    Ok(())
}

fn report_markdown(
    config: &RunConfig,
    prepared: &Prepared,
    rows: &[ReportRow],
    failures: &[(ModelKind, String)],
    chi2: &Chi2QqReport,
) -> String {
    let mut out = String::from("# Wind speed regression benchmark\n\n");
    out.push_str(&format!(
        "- {} hourly rows ({} incomplete rows dropped), {} features\n",
        prepared.dataset.n(),
        prepared.dropped,
        prepared.dataset.d()
    ));
    out.push_str(&format!(
        "- split: {} train / {} test (ratio {}, seed {}, {} order)\n",
        prepared.split.train.n(),
        prepared.split.test.n(),
        config.train_ratio,
        config.seed,
        match config.split_mode {
            SplitMode::Random => "shuffled",
            SplitMode::Chronological => "chronological",
        }
    ));
    out.push_str(
        "- features standardized to zero mean and unit variance on the training split\n\n",
    );
    out.push_str("Held-out test metrics:\n\n");
    out.push_str(&to_markdown(rows));
    out.push_str(&format!(
        "\nχ² Q–Q diagnostic on the standardized training features: mean squared \
         Mahalanobis distance {:.6} over n={}, d={}{}.\n",
        chi2.mean_sq_distance,
        chi2.n,
        chi2.d,
        if chi2.regularized {
            " (covariance ridge-regularized)"
        } else {
            ""
        }
    ));
    if !failures.is_empty() {
        out.push_str("\n## Failed models\n\n");
        for (kind, error) in failures {
            out.push_str(&format!("- {}: {}\n", kind.algorithm_name(), error));
        }
    }
    out
}

#[derive(Debug)]
pub struct RunSummary {
    pub eval: EvalOutcome,
    pub model_seconds: Vec<(ModelKind, f64)>,
}

/// prepare + train + evaluate in one deterministic shot.
pub fn cmd_reproduce(config: &RunConfig) -> Result<RunSummary, PipelineError> {
    let prepared = cmd_prepare(config)?;
    let outcome = cmd_train(config, &prepared.train_std)?;
    let eval = cmd_evaluate(config, &prepared, &outcome)?;
    Ok(RunSummary {
        eval,
        model_seconds: outcome.models.iter().map(|m| (m.kind, m.seconds)).collect(),
    })
}
