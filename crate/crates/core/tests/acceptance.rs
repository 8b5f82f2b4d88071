//! Acceptance gate for the whole benchmark: ten sequential checks
//! exercising the metric layer against independent oracles, the
//! closed-form solvers, backpropagation, the ensemble learners, the SVR
//! dual, the full synthetic pipeline, determinism, and the chi-square
//! Q-Q diagnostic. One verdict line prints per check; the process exits
//! nonzero if any binding check fails.
//!
//! The reference-table check is advisory: it runs only when a conforming
//! hourly export is supplied through the environment (see
//! `REAL_DATA_ENV`), because the exact historical extract is not
//! distributable with the repository.

use std::env;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use anemo::diagnostics::{chi2_qq_series, pearson};
use anemo::linalg::{self, Matrix};
use anemo::linear::{fit_lasso, fit_ols, fit_ridge, lasso_alpha_max, LassoConfig};
use anemo::metrics::{mae, medae, mse, r2};
use anemo::neural::{
    build_cnn, build_lstm, build_mlp, gradient_check, lstm_forget_bias_range, lstm_unroll, Layer,
    LayerSpec,
};
use anemo::pipeline::{cmd_reproduce, HyperParams, RunConfig};
use anemo::svr::{dual_objective, fit_svr, Kernel, SvrConfig};
use anemo::synth::{write_files, SynthConfig};
use anemo::tree::{fit_adaboost, fit_tree, AdaBoostConfig, Node, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const REAL_DATA_ENV: &str = "ANEMO_NREL_CSV";
const REAL_MAPPING_ENV: &str = "ANEMO_NREL_MAPPING";

type Check = fn() -> Result<String, String>;

fn main() {
    let checks: &[(&str, Check)] = &[
        ("metrics match a direct oracle", check_metric_oracles),
        ("closed-form linear solutions", check_closed_forms),
        ("backprop matches finite differences", check_gradients),
        ("analytic LSTM cell states", check_lstm_analytic),
        ("tree and boosting oracles", check_ensemble_oracles),
        ("SVR dual optimality", check_svr_dual),
        ("synthetic end-to-end quality", check_synthetic_end_to_end),
        ("reference-table reproduction", check_reference_table),
        ("byte-identical reruns", check_deterministic_reruns),
        ("chi-square Q-Q linearity", check_chi2_qq),
    ];

    let mut failures = 0usize;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(Ok(detail)) => {
                println!("PASS {:2}/10 {name} [{secs:.1}s] — {detail}", i + 1);
            }
            Ok(Err(why)) => {
                failures += 1;
                println!("FAIL {:2}/10 {name} [{secs:.1}s] — {why}", i + 1);
            }
            Err(panic) => {
                failures += 1;
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "opaque panic".to_string());
                println!("FAIL {:2}/10 {name} [{secs:.1}s] — panicked: {msg}", i + 1);
            }
        }
    }

    if failures > 0 {
        eprintln!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err(format!($($arg)+));
        }
    };
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// 1. MAE/MSE/MedAE/R² against direct re-evaluations of their defining
///    formulas, over 100 seeded random prediction sets, 1e-12 relative.
fn check_metric_oracles() -> Result<String, String> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut r2_cases = 0usize;

    for _ in 0..100 {
        let n: usize = rng.random_range(1..=1000);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-40.0..40.0)).collect();
        let y_hat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-6.0..6.0)).collect();

        let abs_err: Vec<f64> = y.iter().zip(&y_hat).map(|(a, p)| (a - p).abs()).collect();
        let nf = n as f64;
        let direct_mae = abs_err.iter().sum::<f64>() / nf;
        let direct_mse = abs_err.iter().map(|e| e * e).sum::<f64>() / nf;
        let mut sorted = abs_err.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let direct_medae = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };

        worst = worst.max(rel_gap(mae(&y, &y_hat).map_err(|e| e.to_string())?, direct_mae));
        worst = worst.max(rel_gap(mse(&y, &y_hat).map_err(|e| e.to_string())?, direct_mse));
        worst = worst.max(rel_gap(
            medae(&y, &y_hat).map_err(|e| e.to_string())?,
            direct_medae,
        ));

        if n >= 2 {
            let mean = y.iter().sum::<f64>() / nf;
            let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
            let ss_res: f64 = abs_err.iter().map(|e| e * e).sum();
            let direct_r2 = 1.0 - ss_res / ss_tot;
            worst = worst.max(rel_gap(r2(&y, &y_hat).map_err(|e| e.to_string())?, direct_r2));
            r2_cases += 1;
        } else {
            ensure!(
                r2(&y, &y_hat).is_err(),
                "R² of a single observation must be refused"
            );
        }
    }

    let secs = started.elapsed().as_secs_f64();
    ensure!(worst <= 1e-12, "worst relative gap {worst:.3e} exceeds 1e-12");
    ensure!(secs < 1.0, "took {secs:.2}s, budget is 1 s");
    Ok(format!(
        "worst relative gap {worst:.1e} over 100 seeded sets ({r2_cases} with R²)"
    ))
}

/// Gaussian elimination with partial pivoting, written here so the
/// closed-form comparisons do not lean on the library's own solver.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, String> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err("reference system is singular".to_string());
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

/// 2. OLS against the augmented normal equations, ridge against the
///    penalized normal equations on a centered fixture, single-feature
///    lasso against the scalar soft threshold, and exact full shrinkage
///    at (and beyond) the critical penalty.
fn check_closed_forms() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (n, d) = (60, 4);
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let true_w = [1.5, -2.0, 0.7, 3.0];
    let y: Vec<f64> = (0..n)
        .map(|i| 4.0 + linalg::dot(x.row(i), &true_w) + rng.random_range(-0.3..0.3))
        .collect();

    let (ols, _) = fit_ols(&x, &y).map_err(|e| e.to_string())?;
    let mut gram = vec![vec![0.0; d + 1]; d + 1];
    let mut rhs = vec![0.0; d + 1];
    let aug = |i: usize, j: usize| if j == 0 { 1.0 } else { x.get(i, j - 1) };
    for r in 0..=d {
        for c in 0..=d {
            gram[r][c] = (0..n).map(|i| aug(i, r) * aug(i, c)).sum();
        }
        rhs[r] = (0..n).map(|i| aug(i, r) * y[i]).sum();
    }
    let beta = gauss_solve(gram, rhs)?;
    let mut worst = (ols.intercept - beta[0]).abs();
    for j in 0..d {
        worst = worst.max((ols.weights[j] - beta[j + 1]).abs());
    }
    ensure!(worst <= 1e-8, "OLS vs normal equations differ by {worst:.3e}");

    // centered fixture so the penalized normal equations need no
    // intercept handling
    let x_mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = Matrix::from_fn(n, d, |i, j| x.get(i, j) - x_mean[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let alpha = 2.5;
    let (ridge, _) = fit_ridge(&xc, &yc, alpha).map_err(|e| e.to_string())?;
    let mut pen = vec![vec![0.0; d]; d];
    let mut prhs = vec![0.0; d];
    for r in 0..d {
        for c in 0..d {
            pen[r][c] = (0..n).map(|i| xc.get(i, r) * xc.get(i, c)).sum();
        }
        pen[r][r] += alpha;
        prhs[r] = (0..n).map(|i| xc.get(i, r) * yc[i]).sum();
    }
    let ridge_ref = gauss_solve(pen, prhs)?;
    for j in 0..d {
        worst = worst.max((ridge.weights[j] - ridge_ref[j]).abs());
    }
    worst = worst.max(ridge.intercept.abs());
    ensure!(worst <= 1e-8, "ridge vs penalized normal equations differ by {worst:.3e}");

    // one feature: coordinate descent must land on the soft threshold
    let n1 = 50;
    let x1 = Matrix::from_fn(n1, 1, |_, _| rng.random_range(-1.0..3.0));
    let y1: Vec<f64> = (0..n1)
        .map(|i| 1.0 + 2.0 * x1.get(i, 0) + rng.random_range(-0.2..0.2))
        .collect();
    let alpha1 = 0.15;
    let (lasso, _) = fit_lasso(
        &x1,
        &y1,
        &LassoConfig {
            alpha: alpha1,
            tol: 1e-12,
            max_iter: 10_000,
        },
    )
    .map_err(|e| e.to_string())?;
    let xm = (0..n1).map(|i| x1.get(i, 0)).sum::<f64>() / n1 as f64;
    let ym = y1.iter().sum::<f64>() / n1 as f64;
    let sxy = (0..n1)
        .map(|i| (x1.get(i, 0) - xm) * (y1[i] - ym))
        .sum::<f64>()
        / n1 as f64;
    let sxx = (0..n1).map(|i| (x1.get(i, 0) - xm).powi(2)).sum::<f64>() / n1 as f64;
    let shrunk = sxy.signum() * (sxy.abs() - alpha1).max(0.0) / sxx;
    worst = worst.max((lasso.weights[0] - shrunk).abs());
    worst = worst.max((lasso.intercept - (ym - xm * shrunk)).abs());
    ensure!(worst <= 1e-8, "lasso vs soft threshold differ by {worst:.3e}");

    // at the critical penalty every coefficient must be exactly zero
    let amax = lasso_alpha_max(&x, &y);
    for a in [amax, amax * 1.25] {
        let (all_zero, _) = fit_lasso(
            &x,
            &y,
            &LassoConfig {
                alpha: a,
                tol: 1e-10,
                max_iter: 1000,
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            all_zero.weights.iter().all(|w| *w == 0.0),
            "penalty {a:.6} left nonzero coefficients {:?}",
            all_zero.weights
        );
    }

    Ok(format!(
        "largest coefficient gap {worst:.1e}; critical penalty zeroes every coefficient"
    ))
}

/// 3. Central finite differences over every parameter of a dense stack,
///    a conv/pool stack, and a three-step LSTM; kink crossings excluded.
fn check_gradients() -> Result<String, String> {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut excluded = 0usize;
    let mut checked = 0usize;

    let mut mlp = build_mlp(4, 2, 6, 21);
    let report = gradient_check(
        &mut mlp,
        &Matrix::from_rows(&[vec![0.4, -1.2, 0.8, 0.1]]),
        0.7,
        1e-6,
    )
    .map_err(|e| e.to_string())?;
    ensure!(report.checked > 0, "dense check covered no parameters");
    worst = worst.max(report.max_rel_error);
    excluded += report.excluded.len();
    checked += report.checked;

    let mut cnn = build_cnn(8, 3, 2, 2, 5, 22);
    let wave = Matrix::from_fn(8, 1, |t, _| (t as f64 * 0.7).sin());
    let report = gradient_check(&mut cnn, &wave, -0.3, 1e-6).map_err(|e| e.to_string())?;
    ensure!(report.checked > 0, "conv check covered no parameters");
    worst = worst.max(report.max_rel_error);
    excluded += report.excluded.len();
    checked += report.checked;

    let mut lstm = build_lstm(2, 4, 23);
    // redraw at ±0.5 scale; the training-time init is small enough to
    // push recurrent-weight gradients under the finite-difference noise
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for layer in &mut lstm.layers {
        for p in &mut layer.params {
            *p = rng.random_range(-0.5..0.5);
        }
    }
    let seq = Matrix::from_rows(&[vec![0.5, -0.2], vec![-0.1, 0.9], vec![0.3, 0.3]]);
    let report = gradient_check(&mut lstm, &seq, 0.25, 1e-6).map_err(|e| e.to_string())?;
    ensure!(
        report.excluded.is_empty(),
        "a smooth network excluded {} parameters",
        report.excluded.len()
    );
    ensure!(
        report.checked == lstm.n_params(),
        "LSTM check covered {} of {} parameters",
        report.checked,
        lstm.n_params()
    );
    worst = worst.max(report.max_rel_error);
    checked += report.checked;

    let secs = started.elapsed().as_secs_f64();
    ensure!(worst < 1e-5, "max relative error {worst:.3e} at or above 1e-5");
    ensure!(secs < 30.0, "took {secs:.1}s, budget is 30 s");
    Ok(format!(
        "max relative error {worst:.1e} over {checked} parameters; {excluded} kink-adjacent excluded"
    ))
}

/// 4. Zero-parameter LSTM keeps h = c = 0 exactly; a pinned forget gate
///    carries the cell state bit-exactly across ten steps.
fn check_lstm_analytic() -> Result<String, String> {
    let silent = Layer::new(LayerSpec::Lstm {
        input_dim: 3,
        hidden: 4,
    });
    let xs = Matrix::from_fn(5, 3, |t, j| (t * 3 + j) as f64);
    let (hs, cs) = lstm_unroll(&silent, &xs, None).map_err(|e| e.to_string())?;
    for t in 0..=5 {
        for j in 0..4 {
            ensure!(
                hs.get(t, j) == 0.0 && cs.get(t, j) == 0.0,
                "state not exactly zero at step {t}"
            );
        }
    }

    let mut pinned = Layer::new(LayerSpec::Lstm {
        input_dim: 2,
        hidden: 3,
    });
    for p in &mut pinned.params[lstm_forget_bias_range(2, 3)] {
        *p = 50.0;
    }
    let quiet = Matrix::zeros(10, 2);
    let h0 = vec![0.0; 3];
    let c0 = vec![1.0, -0.5, 2.0];
    let (_, cs) = lstm_unroll(&pinned, &quiet, Some((&h0, &c0))).map_err(|e| e.to_string())?;
    for t in 1..=10 {
        for j in 0..3 {
            ensure!(
                cs.get(t, j) == c0[j],
                "cell {j} drifted at step {t}: {} vs {}",
                cs.get(t, j),
                c0[j]
            );
        }
    }
    Ok("zero cell exact over 5 steps; pinned forget gate carries the cell bit-exactly over 10".into())
}

fn toy_regression(seed: u64, n: usize, d: usize) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0));
    let y = (0..n)
        .map(|i| {
            let r = x.row(i);
            r[0].sin() * 2.0 + r[1 % d] * 0.5 + rng.random_range(-0.1..0.1)
        })
        .collect();
    (x, y)
}

// Reference splitter values: improvements below GAIN_FLOOR×(node SSE)
// are noise; challengers must beat the incumbent by TIE×(node SSE), so
// mathematically tied splits resolve to the lowest feature/threshold.
const GAIN_FLOOR: f64 = 1e-12;
const TIE: f64 = 1e-9;

fn exhaustive_build(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    depth: usize,
    max_depth: usize,
) -> Node {
    let m = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / m;
    let node_sse: f64 = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    if idx.len() < 2 || depth >= max_depth || node_sse <= f64::EPSILON * m * (mean * mean).max(1.0)
    {
        return Node::Leaf { value: mean };
    }

    let sse_of = |part: &[usize]| -> f64 {
        let pm = part.iter().map(|&i| y[i]).sum::<f64>() / part.len() as f64;
        part.iter().map(|&i| (y[i] - pm).powi(2)).sum()
    };

    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, gain)
    for feature in 0..x.cols() {
        let mut values: Vec<f64> = idx.iter().map(|&i| x.get(i, feature)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let threshold = 0.5 * (pair[0] + pair[1]);
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
            if left.is_empty() || right.is_empty() {
                continue;
            }
            let gain = node_sse - (sse_of(&left) + sse_of(&right));
            let clearly_better = match best {
                None => gain > GAIN_FLOOR * node_sse,
                Some((_, _, g)) => gain > g + TIE * node_sse,
            };
            if clearly_better {
                best = Some((feature, threshold, gain));
            }
        }
    }
    match best {
        None => Node::Leaf { value: mean },
        Some((feature, threshold, _)) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| x.get(i, feature) <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(exhaustive_build(x, y, &left, depth + 1, max_depth)),
                right: Box::new(exhaustive_build(x, y, &right, depth + 1, max_depth)),
            }
        }
    }
}

fn trees_equal(a: &Node, b: &Node, path: &str) -> Result<(), String> {
    match (a, b) {
        (Node::Leaf { value: va }, Node::Leaf { value: vb }) => {
            if (va - vb).abs() > 1e-12 {
                return Err(format!("leaf value at {path}: {va} vs {vb}"));
            }
            Ok(())
        }
        (
            Node::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            Node::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => {
            if fa != fb {
                return Err(format!("feature at {path}: {fa} vs {fb}"));
            }
            if (ta - tb).abs() > 1e-12 {
                return Err(format!("threshold at {path}: {ta} vs {tb}"));
            }
            trees_equal(la, lb, &format!("{path}L"))?;
            trees_equal(ra, rb, &format!("{path}R"))
        }
        _ => Err(format!("node shapes differ at {path}")),
    }
}

/// 5. The greedy tree must match an exhaustive-split search node for
///    node, and three boosting rounds must match a hand-stepped loss /
///    stage-weight recurrence to 1e-12.
fn check_ensemble_oracles() -> Result<String, String> {
    let (x, y) = toy_regression(505, 40, 3);
    let config = TreeConfig {
        max_depth: Some(3),
        ..TreeConfig::default()
    };
    let tree = fit_tree(&x, &y, None, &config, None).map_err(|e| e.to_string())?;
    let all: Vec<usize> = (0..40).collect();
    let reference = exhaustive_build(&x, &y, &all, 0, 3);
    trees_equal(&tree.root, &reference, "·")?;

    let (xb, yb) = toy_regression(51, 40, 2);
    let tree_config = TreeConfig {
        max_depth: Some(2),
        ..TreeConfig::default()
    };
    let model = fit_adaboost(
        &xb,
        &yb,
        &AdaBoostConfig {
            n_estimators: 3,
            learning_rate: 1.0,
            tree: tree_config,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        model.trees.len() == 3,
        "fixture sustained {} rounds, need 3",
        model.trees.len()
    );

    let n = yb.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut worst: f64 = 0.0;
    for (round, logw) in model.stage_log_weights.iter().enumerate() {
        let w_sum: f64 = weights.iter().sum();
        let p: Vec<f64> = weights.iter().map(|w| w / w_sum).collect();
        let tree = fit_tree(&xb, &yb, Some(&p), &tree_config, None).map_err(|e| e.to_string())?;
        let pred = tree.predict(&xb);
        let abs_err: Vec<f64> = pred.iter().zip(&yb).map(|(a, b)| (a - b).abs()).collect();
        let max_err = abs_err.iter().cloned().fold(0.0f64, f64::max);
        ensure!(max_err > 0.0, "degenerate round {round}");
        let loss: Vec<f64> = abs_err.iter().map(|e| e / max_err).collect();
        let avg: f64 = p.iter().zip(&loss).map(|(pi, li)| pi * li).sum();
        ensure!(avg < 0.5, "round {round} rejected in the reference recurrence");
        let beta = (avg / (1.0 - avg)).max(1e-10);
        for (w, li) in weights.iter_mut().zip(&loss) {
            *w *= beta.powf(1.0 - li);
        }
        worst = worst.max(((-logw).exp() - beta).abs());
    }
    ensure!(worst <= 1e-12, "stage weights differ by {worst:.3e}");

    Ok(format!(
        "greedy tree identical to exhaustive search; 3 stage weights match to {worst:.1e}"
    ))
}

/// Euclidean projection onto {0 ≤ θ ≤ C, Σ(head − tail) = 0}: clip after
/// shifting along the constraint normal, multiplier found by bisection.
fn project_feasible(raw: &[f64], n: usize, c: f64) -> Vec<f64> {
    let clip = |v: f64| v.clamp(0.0, c);
    let balance = |lambda: f64| -> f64 {
        let head: f64 = (0..n).map(|i| clip(raw[i] - lambda)).sum();
        let tail: f64 = (0..n).map(|i| clip(raw[i + n] + lambda)).sum();
        head - tail
    };
    let reach = 1.0 + c + raw.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let (mut lo, mut hi) = (-reach, reach);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let mut out = Vec::with_capacity(2 * n);
    out.extend((0..n).map(|i| clip(raw[i] - lambda)));
    out.extend((0..n).map(|i| clip(raw[i + n] + lambda)));
    out
}

/// Deliberately slow reference: projected gradient descent from zero on
/// the same dual objective the production solver minimizes.
fn projected_gradient_reference(
    x: &Matrix,
    y: &[f64],
    config: &SvrConfig,
    iters: usize,
) -> Vec<f64> {
    let n = x.rows();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = config.kernel.eval(x.row(i), x.row(j));
        }
    }
    // gradient Lipschitz bound via the row-sum norm of the quadratic block
    let l = 2.0
        * k.iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
    let step = 1.0 / l;

    let mut theta = vec![0.0; 2 * n];
    for _ in 0..iters {
        let beta: Vec<f64> = (0..n).map(|i| theta[i] - theta[i + n]).collect();
        let kb: Vec<f64> = (0..n)
            .map(|i| k[i].iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect();
        let raw: Vec<f64> = (0..2 * n)
            .map(|idx| {
                let g = if idx < n {
                    kb[idx] + config.epsilon - y[idx]
                } else {
                    -kb[idx - n] + config.epsilon + y[idx - n]
                };
                theta[idx] - step * g
            })
            .collect();
        theta = project_feasible(&raw, n, config.c);
    }
    theta
}

/// 6. The SMO solution's dual objective sits within 1e-4 of a slow
///    projected-gradient reference; the dual point balances to 1e-8 and
///    stays inside its box.
fn check_svr_dual() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let n = 15;
    let x = Matrix::from_fn(n, 2, |_, _| rng.random_range(-1.5..1.5));
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r = x.row(i);
            r[0].sin() + 0.5 * r[1] + rng.random_range(-0.05..0.05)
        })
        .collect();
    let config = SvrConfig {
        c: 2.0,
        epsilon: 0.05,
        kernel: Kernel::Rbf { gamma: 0.8 },
        tol: 1e-6,
        max_iter: 1_000_000,
    };
    let fit = fit_svr(&x, &y, &config).map_err(|e| e.to_string())?;

    let balance: f64 = (0..n).map(|i| fit.dual[i] - fit.dual[i + n]).sum();
    ensure!(balance.abs() <= 1e-8, "dual balance {balance:.3e} exceeds 1e-8");
    ensure!(
        fit.dual.iter().all(|&a| (0.0..=config.c).contains(&a)),
        "a dual coordinate escaped [0, C]"
    );

    let reference = projected_gradient_reference(&x, &y, &config, 1_000_000);
    let got = dual_objective(&x, &y, &config, &fit.dual);
    let want = dual_objective(&x, &y, &config, &reference);
    let gap = (got - want).abs();
    ensure!(gap <= 1e-4, "objective gap {gap:.3e} exceeds 1e-4");

    Ok(format!(
        "objective gap {gap:.1e}; Σ(α−α*) = {balance:.1e}; box respected"
    ))
}

fn r2_of(rows: &[anemo::report::ReportRow], number: usize) -> Result<f64, String> {
    rows.iter()
        .find(|r| r.model_number == number)
        .and_then(|r| r.r2)
        .ok_or_else(|| format!("model {number} reported no R²"))
}

/// 7. Binding end-to-end check on the bundled synthetic generator: the
///    full twelve-model lineup completes within five minutes and the
///    random forest and LSTM each clear R² 0.85 on the held-out split.
fn check_synthetic_end_to_end() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (csv, mapping) = write_files(&dir.path().join("input"), &SynthConfig::default())
        .map_err(|e| e.to_string())?;
    let mut config = RunConfig::new(csv, mapping, dir.path().join("out"));
    config.jobs = std::thread::available_parallelism()
        .map(|v| v.get().min(4))
        .unwrap_or(1);

    let started = Instant::now();
    let summary = cmd_reproduce(&config).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();

    ensure!(
        summary.eval.failures.is_empty(),
        "failed models: {:?}",
        summary.eval.failures
    );
    ensure!(
        summary.eval.rows.len() == 12,
        "expected 12 result rows, got {}",
        summary.eval.rows.len()
    );
    let forest = r2_of(&summary.eval.rows, 7)?;
    let lstm = r2_of(&summary.eval.rows, 12)?;
    ensure!(forest >= 0.85, "random forest R² {forest:.3} below 0.85");
    ensure!(lstm >= 0.85, "LSTM R² {lstm:.3} below 0.85");
    ensure!(secs < 300.0, "lineup took {secs:.0}s, budget is 300 s");

    Ok(format!(
        "random forest R² {forest:.3}, LSTM R² {lstm:.3}, 12 models in {secs:.0}s"
    ))
}

/// 8. Advisory reproduction of the reference results table; runs
///    only when a conforming hourly export is supplied via environment
///    variables, since the original extract cannot ship with the code.
fn check_reference_table() -> Result<String, String> {
    let Some(csv) = env::var_os(REAL_DATA_ENV).map(PathBuf::from) else {
        return Ok(format!(
            "skipped — set {REAL_DATA_ENV} (and optionally {REAL_MAPPING_ENV}) to run"
        ));
    };
    let mapping = env::var_os(REAL_MAPPING_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/nrel_mapping.json")
        });

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut config = RunConfig::new(csv, mapping, dir.path().join("out"));
    config.jobs = std::thread::available_parallelism()
        .map(|v| v.get().min(4))
        .unwrap_or(1);
    let summary = cmd_reproduce(&config).map_err(|e| e.to_string())?;
    let rows = &summary.eval.rows;

    let lstm = r2_of(rows, 12)?;
    let dnn = r2_of(rows, 10)?;
    let cnn = r2_of(rows, 11)?;
    let bagging = r2_of(rows, 6)?;
    let forest = r2_of(rows, 7)?;
    let linear_best = (1..=5)
        .map(|m| r2_of(rows, m))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut advisories = Vec::new();
    if (lstm - 0.978).abs() > 0.05 {
        advisories.push(format!("LSTM R² {lstm:.3} outside 0.978±0.05"));
    }
    if !(lstm > dnn && dnn > cnn) {
        advisories.push(format!(
            "recurrent>dense>convolutional ordering broken ({lstm:.3}, {dnn:.3}, {cnn:.3})"
        ));
    }
    if bagging.min(forest) <= linear_best {
        advisories.push(format!(
            "tree ensembles ({:.3}) did not beat the linear family ({linear_best:.3})",
            bagging.min(forest)
        ));
    }

    if advisories.is_empty() {
        Ok(format!(
            "LSTM {lstm:.3}, DNN {dnn:.3}, CNN {cnn:.3}; expected orderings hold"
        ))
    } else {
        // advisory by design: achievable numbers depend on the exact
        // historical extract, which this repository cannot pin
        Ok(format!("ran on supplied data; advisory gaps: {}", advisories.join("; ")))
    }
}

/// 9. Two runs of the same configuration must write byte-identical
///    result tables.
fn check_deterministic_reruns() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (csv, mapping) = write_files(
        &dir.path().join("input"),
        &SynthConfig {
            n_hours: 240,
            n_features: 8,
            ..SynthConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut config = RunConfig::new(csv, mapping, dir.path().join("out"));
    config.hyper = HyperParams {
        n_trees: 10,
        adaboost_stages: 10,
        mlp_depth: 2,
        mlp_width: 8,
        cnn_filters: 8,
        cnn_dense: 8,
        lstm_hidden: 8,
        epochs: 8,
        ..HyperParams::default()
    };
    config.jobs = 2;

    cmd_reproduce(&config).map_err(|e| e.to_string())?;
    let first = fs::read(config.out_dir.join("report.csv")).map_err(|e| e.to_string())?;
    cmd_reproduce(&config).map_err(|e| e.to_string())?;
    let second = fs::read(config.out_dir.join("report.csv")).map_err(|e| e.to_string())?;

    ensure!(!first.is_empty(), "first run produced an empty report");
    ensure!(first == second, "reruns disagree on report.csv bytes");
    Ok(format!("rerun byte-identical ({} bytes)", first.len()))
}

/// 10. Squared Mahalanobis distances of a seeded trivariate normal
///     sample line up with chi-square quantiles (Pearson > 0.99).
fn check_chi2_qq() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mix = [
        [1.0, 0.0, 0.0],
        [0.4, 0.9, 0.0],
        [-0.3, 0.2, 0.8],
    ];
    let mut rows = Vec::with_capacity(5000);
    for _ in 0..5000 {
        let z: Vec<f64> = (0..3)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        rows.push(
            (0..3)
                .map(|r| (0..3).map(|c| mix[r][c] * z[c]).sum())
                .collect::<Vec<f64>>(),
        );
    }
    let x = Matrix::from_rows(&rows);
    let (series, report) = chi2_qq_series(&x, "trivariate normal sample").map_err(|e| e.to_string())?;
    let corr = pearson(&series.points);
    ensure!(corr > 0.99, "Q-Q correlation {corr:.4} at or below 0.99");
    Ok(format!(
        "Q-Q correlation {corr:.4} on n = {}, d = {}",
        report.n, report.d
    ))
}
