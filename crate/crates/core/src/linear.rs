//! Linear regression family: ordinary least squares, ridge, lasso,
//! Bayesian ridge, and Huber.
//!
//! All fits estimate an unpenalized intercept by centering; `weights`
//! always refers to the feature coefficients only. Iterative solvers
//! report their stopping state in [`Convergence`] instead of erroring
//! when the iteration budget runs out.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};

#[derive(Debug)]
pub enum LinearError {
    DimensionMismatch { rows: usize, targets: usize },
    EmptyInput,
}

impl fmt::Display for LinearError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearError::DimensionMismatch { rows, targets } => write!(
                f,
                "design matrix has {} rows but target has {} entries",
                rows, targets
            ),
            LinearError::EmptyInput => write!(f, "cannot fit on zero rows or zero features"),
        }
    }
}

impl std::error::Error for LinearError {}

/// Affine predictor ŷ = Xw + b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| linalg::dot(x.row(i), &self.weights) + self.intercept)
            .collect()
    }
}

/// Stopping state of an iterative solver. Closed-form fits report one
/// "iteration" and converged = true.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub converged: bool,
    pub notes: Vec<String>,
}

impl Convergence {
    fn closed_form() -> Self {
        Convergence {
            iterations: 1,
            converged: true,
            notes: Vec::new(),
        }
    }
}

fn check_shape(x: &Matrix, y: &[f64]) -> Result<(), LinearError> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(LinearError::EmptyInput);
    }
    if x.rows() != y.len() {
        return Err(LinearError::DimensionMismatch {
            rows: x.rows(),
            targets: y.len(),
        });
    }
    Ok(())
}

/// Centers X (per column) and y; returns (xc, yc, x_mean, y_mean).
fn center(x: &Matrix, y: &[f64]) -> (Matrix, Vec<f64>, Vec<f64>, f64) {
    let (n, d) = (x.rows(), x.cols());
    let mut x_mean = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        for j in 0..d {
            x_mean[j] += row[j];
        }
    }
    for m in &mut x_mean {
        *m /= n as f64;
    }
    let y_mean = linalg::mean(y);
    let xc = Matrix::from_fn(n, d, |i, j| x.get(i, j) - x_mean[j]);
    let yc = y.iter().map(|&v| v - y_mean).collect();
    (xc, yc, x_mean, y_mean)
}

/// Ordinary least squares via the normal equations on the augmented
/// design [1 | X]. Rank-deficient systems fall back to the minimum-norm
/// solution, which is noted in the convergence record.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<(LinearModel, Convergence), LinearError> {
    check_shape(x, y)?;
    let (n, d) = (x.rows(), x.cols());
    let aug = Matrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, j - 1) });
    let gram = aug.gram();
    let rhs = aug.t_matvec(y);

    let mut conv = Convergence::closed_form();
    let coef = match linalg::solve(&gram, &rhs) {
        Some(c) => c,
        None => {
            conv.notes
                .push("normal equations singular; using minimum-norm solution".to_string());
            linalg::min_norm_lstsq(&aug, y)
        }
    };
    Ok((
        LinearModel {
            weights: coef[1..].to_vec(),
            intercept: coef[0],
        },
        conv,
    ))
}

/// Ridge regression: minimizes ‖y − Xw − b‖² + α‖w‖² with the intercept
/// left out of the penalty.
pub fn fit_ridge(
    x: &Matrix,
    y: &[f64],
    alpha: f64,
) -> Result<(LinearModel, Convergence), LinearError> {
    check_shape(x, y)?;
    assert!(alpha >= 0.0, "penalty must be non-negative");
    let d = x.cols();
    let (xc, yc, x_mean, y_mean) = center(x, y);

    let mut gram = xc.gram();
    for j in 0..d {
        let v = gram.get(j, j) + alpha;
        gram.set(j, j, v);
    }
    let rhs = xc.t_matvec(&yc);

    let mut conv = Convergence::closed_form();
    let weights = match linalg::solve(&gram, &rhs) {
        Some(w) => w,
        None => {
            // only reachable at alpha = 0 with collinear features
            conv.notes
                .push("penalized system singular; using minimum-norm solution".to_string());
            linalg::min_norm_lstsq(&xc, &yc)
        }
    };
    let intercept = y_mean - linalg::dot(&x_mean, &weights);
    Ok((LinearModel { weights, intercept }, conv))
}

/// Smallest penalty at which the lasso solution is identically zero:
/// max_j |x̃_jᵀ(y − ȳ)| / n over centered columns x̃. Centering the
/// columns changes nothing mathematically — (y − ȳ) is orthogonal to the
/// all-ones vector — but reusing the solver's own products makes the
/// boundary case α = α_max shrink every coordinate to exactly zero.
pub fn lasso_alpha_max(x: &Matrix, y: &[f64]) -> f64 {
    let n = x.rows() as f64;
    let (xc, yc, _, _) = center(x, y);
    xc.t_matvec(&yc)
        .iter()
        .map(|v| v.abs() / n)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
pub struct LassoConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            alpha: 1.0,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

fn soft_threshold(rho: f64, alpha: f64) -> f64 {
    rho.signum() * (rho.abs() - alpha).max(0.0)
}

/// Lasso via cyclic coordinate descent on the objective
/// (1/2n)‖y − Xw − b‖² + α‖w‖₁. One pass over all coordinates counts as
/// one iteration; the solver stops when no coordinate moved more than
/// `tol`.
pub fn fit_lasso(
    x: &Matrix,
    y: &[f64],
    config: &LassoConfig,
) -> Result<(LinearModel, Convergence), LinearError> {
    check_shape(x, y)?;
    assert!(config.alpha >= 0.0, "penalty must be non-negative");
    let (n, d) = (x.rows(), x.cols());
    let nf = n as f64;
    let (xc, yc, x_mean, y_mean) = center(x, y);

    // z_j = (1/n)‖x_j‖² for the centered column
    let col_norm: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| xc.get(i, j).powi(2)).sum::<f64>() / nf)
        .collect();

    let mut w = vec![0.0; d];
    let mut residual = yc.clone();
    let mut conv = Convergence {
        iterations: 0,
        converged: false,
        notes: Vec::new(),
    };

    for iter in 0..config.max_iter {
        let mut max_delta: f64 = 0.0;
        for j in 0..d {
            if col_norm[j] == 0.0 {
                continue;
            }
            let old = w[j];
            // partial residual correlation with coordinate j restored
            let rho = (0..n).map(|i| xc.get(i, j) * residual[i]).sum::<f64>() / nf
                + col_norm[j] * old;
            let new = soft_threshold(rho, config.alpha) / col_norm[j];
            if new != old {
                let delta = new - old;
                for i in 0..n {
                    residual[i] -= xc.get(i, j) * delta;
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        conv.iterations = iter + 1;
        if max_delta <= config.tol {
            conv.converged = true;
            break;
        }
    }
    if !conv.converged {
        conv.notes
            .push(format!("coordinate descent hit max_iter = {}", config.max_iter));
    }

    let intercept = y_mean - linalg::dot(&x_mean, &w);
    Ok((LinearModel { weights: w, intercept }, conv))
}

#[derive(Debug, Clone, Copy)]
pub struct BayesianRidgeConfig {
    pub max_iter: usize,
    /// Threshold on the largest single-coefficient change per sweep.
    pub tol: f64,
    /// Gamma hyperprior (shape, rate) shared by both precisions.
    pub prior_shape: f64,
    pub prior_rate: f64,
}

impl Default for BayesianRidgeConfig {
    fn default() -> Self {
        BayesianRidgeConfig {
            max_iter: 300,
            tol: 1e-4,
            prior_shape: 1e-6,
            prior_rate: 1e-6,
        }
    }
}

/// Posterior summary of the Bayesian ridge fit: weight precision λ,
/// noise precision β, and the effective number of well-determined
/// parameters γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesianPosterior {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Bayesian ridge via evidence maximization. Gaussian prior w ~ N(0, λ⁻¹I)
/// and noise precision β are re-estimated from the data:
///   γ = d − λ·tr(Σ),  λ ← (γ + 2a)/(‖μ‖² + 2b),  β ← (n − γ + 2a)/(RSS + 2b),
/// where Σ = (λI + βXᵀX)⁻¹ and μ = βΣXᵀy on centered data. With the
/// precisions held fixed, μ is exactly the ridge solution at α = λ/β.
pub fn fit_bayesian_ridge(
    x: &Matrix,
    y: &[f64],
    config: &BayesianRidgeConfig,
) -> Result<(LinearModel, BayesianPosterior, Convergence), LinearError> {
    check_shape(x, y)?;
    let (n, d) = (x.rows(), x.cols());
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let gram = xc.gram();
    let xty = xc.t_matvec(&yc);

    let y_var = linalg::variance(&yc);
    let mut beta = 1.0 / y_var.max(1e-7);
    let mut lambda = 1.0;
    let mut gamma = 0.0;
    let mut mu = vec![0.0; d];
    let mut conv = Convergence {
        iterations: 0,
        converged: false,
        notes: Vec::new(),
    };

    let posterior = |lambda: f64, beta: f64| -> (Vec<f64>, Matrix) {
        let mut a = Matrix::from_fn(d, d, |i, j| beta * gram.get(i, j));
        for j in 0..d {
            let v = a.get(j, j) + lambda;
            a.set(j, j, v);
        }
        let sigma = linalg::invert(&a).expect("λI + βXᵀX is positive definite");
        let mu = (0..d)
            .map(|i| beta * linalg::dot(sigma.row(i), &xty))
            .collect();
        (mu, sigma)
    };

    for iter in 0..config.max_iter {
        let (new_mu, sigma) = posterior(lambda, beta);

        let fitted = xc.matvec(&new_mu);
        let rss: f64 = yc
            .iter()
            .zip(&fitted)
            .map(|(yi, fi)| (yi - fi).powi(2))
            .sum();
        let trace: f64 = (0..d).map(|j| sigma.get(j, j)).sum();
        gamma = d as f64 - lambda * trace;
        let mu_sq: f64 = new_mu.iter().map(|v| v * v).sum();
        lambda = (gamma + 2.0 * config.prior_shape) / (mu_sq + 2.0 * config.prior_rate);
        beta = (n as f64 - gamma + 2.0 * config.prior_shape) / (rss + 2.0 * config.prior_rate);

        let max_delta = new_mu
            .iter()
            .zip(&mu)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        mu = new_mu;
        conv.iterations = iter + 1;
        if max_delta <= config.tol {
            conv.converged = true;
            break;
        }
    }
    if !conv.converged {
        conv.notes
            .push(format!("evidence updates hit max_iter = {}", config.max_iter));
    }

    // posterior mean under the final precisions
    let (mu, _) = posterior(lambda, beta);
    let intercept = y_mean - linalg::dot(&x_mean, &mu);
    Ok((
        LinearModel {
            weights: mu,
            intercept,
        },
        BayesianPosterior {
            lambda,
            beta,
            gamma,
        },
        conv,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct HuberConfig {
    /// Residuals beyond `delta` robust standard deviations get
    /// down-weighted.
    pub delta: f64,
    /// Small ridge penalty keeping the reweighted system well posed.
    pub alpha: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HuberConfig {
    fn default() -> Self {
        HuberConfig {
            delta: 1.35,
            alpha: 1e-4,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Huber regression via iteratively reweighted least squares. The scale
/// is re-estimated each round as MAD/0.6745; points with |r| ≤ δσ keep
/// weight 1, the rest get δσ/|r|.
pub fn fit_huber(
    x: &Matrix,
    y: &[f64],
    config: &HuberConfig,
) -> Result<(LinearModel, Convergence), LinearError> {
    check_shape(x, y)?;
    let d = x.cols();
    let mut model = LinearModel {
        weights: vec![0.0; d],
        intercept: median(y),
    };
    let mut conv = Convergence {
        iterations: 0,
        converged: false,
        notes: Vec::new(),
    };

    for iter in 0..config.max_iter {
        let fitted = model.predict(x);
        let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
        let center_r = median(&residuals);
        let abs_dev: Vec<f64> = residuals.iter().map(|r| (r - center_r).abs()).collect();
        let sigma = median(&abs_dev) / 0.6745;
        conv.iterations = iter + 1;
        if sigma < 1e-12 {
            // (near-)perfect fit; nothing left to reweight
            conv.converged = true;
            break;
        }
        let cutoff = config.delta * sigma;
        let weights: Vec<f64> = residuals
            .iter()
            .map(|r| if r.abs() <= cutoff { 1.0 } else { cutoff / r.abs() })
            .collect();

        let next = weighted_ridge(x, y, &weights, config.alpha);
        let max_delta = next
            .weights
            .iter()
            .zip(&model.weights)
            .map(|(a, b)| (a - b).abs())
            .fold((next.intercept - model.intercept).abs(), f64::max);
        model = next;
        if max_delta <= config.tol {
            conv.converged = true;
            break;
        }
    }
    if !conv.converged {
        conv.notes
            .push(format!("IRLS hit max_iter = {}", config.max_iter));
    }
    Ok((model, conv))
}

/// Solves min Σωᵢ(yᵢ − b − xᵢᵀw)² + α‖w‖² with the intercept unpenalized
/// (weighted centering).
fn weighted_ridge(x: &Matrix, y: &[f64], omega: &[f64], alpha: f64) -> LinearModel {
    let (n, d) = (x.rows(), x.cols());
    let w_sum: f64 = omega.iter().sum();
    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for i in 0..n {
        let row = x.row(i);
        for j in 0..d {
            x_mean[j] += omega[i] * row[j];
        }
        y_mean += omega[i] * y[i];
    }
    for m in &mut x_mean {
        *m /= w_sum;
    }
    y_mean /= w_sum;

    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        let yc = y[i] - y_mean;
        for j in 0..d {
            let xj = row[j] - x_mean[j];
            rhs[j] += omega[i] * xj * yc;
            for k in j..d {
                let xk = row[k] - x_mean[k];
                let v = gram.get(j, k) + omega[i] * xj * xk;
                gram.set(j, k, v);
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            gram.set(j, k, gram.get(k, j));
        }
        let v = gram.get(j, j) + alpha;
        gram.set(j, j, v);
    }
    let weights = linalg::solve(&gram, &rhs)
        .unwrap_or_else(|| linalg::min_norm_lstsq(&gram, &rhs));
    let intercept = y_mean - linalg::dot(&x_mean, &weights);
    LinearModel { weights, intercept }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
