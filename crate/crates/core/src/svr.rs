//! ε-insensitive support vector regression trained by sequential
//! minimal optimization on the dual.
//!
//! The dual is posed over 2n box-constrained variables
//! θ = (α₀…α_{n−1}, α*₀…α*_{n−1}) with signs s_k (+1 for α, −1 for α*),
//! minimizing ½θᵀQθ + pᵀθ subject to Σ s_kθ_k = 0 and 0 ≤ θ_k ≤ C,
//! where Q_kl = s_k s_l K(x_k, x_l) and p_k = ε − s_k y_k. Each step
//! picks the most-violating pair (largest KKT gap) and solves the
//! two-variable subproblem exactly; the run stops when the gap drops
//! below `tol`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};

#[derive(Debug)]
pub enum SvrError {
    EmptyInput,
    DimensionMismatch { rows: usize, targets: usize },
    BadConfig(String),
}

impl fmt::Display for SvrError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvrError::EmptyInput => write!(f, "cannot fit on zero rows or zero features"),
            SvrError::DimensionMismatch { rows, targets } => write!(
                f,
                "design matrix has {} rows but target has {} entries",
                rows, targets
            ),
            SvrError::BadConfig(msg) => write!(f, "invalid SVR configuration: {}", msg),
        }
    }
}

impl std::error::Error for SvrError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => linalg::dot(a, b),
            Kernel::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

/// The "scale" heuristic: γ = 1 / (d · Var(X)), with the variance pooled
/// over every entry of the design matrix.
pub fn rbf_gamma_scale(x: &Matrix) -> f64 {
    let var = linalg::variance(x.data());
    1.0 / (x.cols() as f64 * var.max(1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: Kernel,
    /// Stop when the maximal KKT violation m − M falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            c: 1.0,
            epsilon: 0.1,
            kernel: Kernel::Rbf { gamma: 1.0 },
            tol: 1e-3,
            max_iter: 100_000,
        }
    }
}

/// Fitted machine: only the support vectors are retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub support_vectors: Matrix,
    /// α_i − α*_i for each support vector.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub kernel: Kernel,
}

impl SvrModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(s, c)| c * self.kernel.eval(self.support_vectors.row(s), row))
                    .sum::<f64>()
                    + self.intercept
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SvrFit {
    pub model: SvrModel,
    pub iterations: usize,
    pub converged: bool,
    /// Final dual point (α₀…α_{n−1}, α*₀…α*_{n−1}); exposed so solver
    /// quality can be audited against the dual objective.
    pub dual: Vec<f64>,
}

/// Dual objective ½θᵀQθ + pᵀθ at an arbitrary feasible point, computed
/// from scratch. Intended for solver audits, not hot paths.
pub fn dual_objective(x: &Matrix, y: &[f64], config: &SvrConfig, theta: &[f64]) -> f64 {
    let n = x.rows();
    assert_eq!(theta.len(), 2 * n);
    let coef: Vec<f64> = (0..n).map(|i| theta[i] - theta[i + n]).collect();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += coef[i] * coef[j] * config.kernel.eval(x.row(i), x.row(j));
        }
    }
    let linear: f64 = (0..n)
        .map(|i| config.epsilon * (theta[i] + theta[i + n]) - y[i] * coef[i])
        .sum();
    0.5 * quad + linear
}

fn sign(k: usize, n: usize) -> f64 {
    if k < n {
        1.0
    } else {
        -1.0
    }
}

/// Curvature floor for degenerate pairs (duplicate points under the
/// kernel); matches the usual SMO safeguard.
const TAU: f64 = 1e-12;

pub fn fit_svr(x: &Matrix, y: &[f64], config: &SvrConfig) -> Result<SvrFit, SvrError> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(SvrError::EmptyInput);
    }
    if n != y.len() {
        return Err(SvrError::DimensionMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    if config.c <= 0.0 {
        return Err(SvrError::BadConfig("C must be positive".into()));
    }
    if config.epsilon < 0.0 {
        return Err(SvrError::BadConfig("epsilon must be non-negative".into()));
    }
    if let Kernel::Rbf { gamma } = config.kernel {
        if gamma <= 0.0 {
            return Err(SvrError::BadConfig("gamma must be positive".into()));
        }
    }

    // dense Gram matrix; at a few thousand rows this is megabytes
    let kernel = Matrix::from_fn(n, n, |i, j| config.kernel.eval(x.row(i), x.row(j)));
    let c = config.c;

    let mut theta = vec![0.0; 2 * n];
    let mut grad: Vec<f64> = (0..2 * n)
        .map(|k| config.epsilon - sign(k, n) * y[k % n])
        .collect();

    let in_up = |k: usize, theta: &[f64]| {
        let s = sign(k, n);
        (s > 0.0 && theta[k] < c) || (s < 0.0 && theta[k] > 0.0)
    };
    let in_low = |k: usize, theta: &[f64]| {
        let s = sign(k, n);
        (s < 0.0 && theta[k] < c) || (s > 0.0 && theta[k] > 0.0)
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut final_gap;

    loop {
        // most-violating pair: i maximizes −s·G over I_up, j minimizes
        // over I_low
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut m_low = f64::INFINITY;
        for k in 0..2 * n {
            let v = -sign(k, n) * grad[k];
            if in_up(k, &theta) && v > m {
                m = v;
                i = k;
            }
            if in_low(k, &theta) && v < m_low {
                m_low = v;
                j = k;
            }
        }
        final_gap = m - m_low;
        if final_gap < config.tol || i == usize::MAX || j == usize::MAX {
            converged = true;
            break;
        }
        if iterations >= config.max_iter {
            break;
        }
        iterations += 1;

        let (si, sj) = (sign(i, n), sign(j, n));
        let (ri, rj) = (i % n, j % n);
        let curvature =
            (kernel.get(ri, ri) + kernel.get(rj, rj) - 2.0 * kernel.get(ri, rj)).max(TAU);

        // move along the feasible direction Δθ_i = s_i·t, Δθ_j = −s_j·t
        let mut t = final_gap / curvature;
        t = t.min(if si > 0.0 { c - theta[i] } else { theta[i] });
        t = t.min(if sj > 0.0 { theta[j] } else { c - theta[j] });
        theta[i] += si * t;
        theta[j] -= sj * t;

        for k in 0..2 * n {
            grad[k] += sign(k, n) * t * (kernel.get(k % n, ri) - kernel.get(k % n, rj));
        }
    }

    // b = −s·G averaged over free variables, else the midpoint of the
    // KKT bracket
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for k in 0..2 * n {
        if theta[k] > 0.0 && theta[k] < c {
            free_sum += -sign(k, n) * grad[k];
            free_count += 1;
        }
    }
    let intercept = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let mut m = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        for k in 0..2 * n {
            let v = -sign(k, n) * grad[k];
            if in_up(k, &theta) {
                m = m.max(v);
            }
            if in_low(k, &theta) {
                m_low = m_low.min(v);
            }
        }
        if m.is_finite() && m_low.is_finite() {
            0.5 * (m + m_low)
        } else {
            linalg::mean(y)
        }
    };

    // retain rows with a materially nonzero coefficient
    let coef_all: Vec<f64> = (0..n).map(|i| theta[i] - theta[i + n]).collect();
    let keep: Vec<usize> = (0..n)
        .filter(|&i| coef_all[i].abs() > 1e-12 * c)
        .collect();
    let model = SvrModel {
        support_vectors: x.select_rows(&keep),
        coefficients: keep.iter().map(|&i| coef_all[i]).collect(),
        intercept,
        kernel: config.kernel,
    };

    Ok(SvrFit {
        model,
        iterations,
        converged,
        dual: theta,
    })
}
