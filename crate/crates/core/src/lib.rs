//! Wind-speed regression benchmark library.
//!
//! Ingests meteorological time-series CSVs, aggregates them to hourly
//! samples, trains twelve regressors (five linear models, three tree
//! ensembles, an RBF support vector machine, and three hand-written
//! neural networks including an LSTM), and evaluates them all on a shared
//! held-out split with MAE / MSE / MedAE / R² plus diagnostic plots.
//!
//! Everything numerical is implemented in this crate: the linear-algebra
//! kernels, the solvers, the backpropagation, and the chi-square
//! quantile machinery. External crates are used only for plumbing
//! (CSV parsing, JSON, RNG streams, timestamps).
//!
//! Module map:
//! - [`linalg`] — dense matrix type and the small solver toolbox
//! - [`data`] — CSV ingestion, hourly aggregation, split, standardization
//! - [`linear`] — OLS, ridge, lasso, Bayesian ridge, Huber
//! - [`tree`] — CART trees, bagging, random forest, AdaBoost.R2
//! - [`svr`] — ε-insensitive SVR trained by SMO
//! - [`neural`] — dense/conv1d/LSTM layers, training loop, gradient checker
//! - [`metrics`] — MAE, MSE, MedAE, R²
//! - [`diagnostics`] — residual / Q-Q / chi-square Q-Q plot series
//! - [`svg`] — standalone SVG renderer for plot series
//! - [`model`] — the uniform fit/predict contract over all twelve models
//! - [`report`] — comparative report emitters (Markdown, CSV)
//! - [`synth`] — seeded synthetic dataset generator
//! - [`pipeline`] — prepare/train/evaluate/reproduce orchestration

pub mod data;
pub mod diagnostics;
pub mod linalg;
pub mod linear;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod pipeline;
pub mod report;
pub mod svg;
pub mod svr;
pub mod synth;
pub mod tree;

pub use linalg::Matrix;
