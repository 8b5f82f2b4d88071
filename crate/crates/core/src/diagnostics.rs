//! Model-diagnostic series: residual-vs-fitted scatter, actual-vs-
//! predicted agreement, training curves, and a multivariate-normality
//! check that plots sorted squared Mahalanobis distances against
//! chi-square quantiles.
//!
//! The chi-square machinery (log-gamma, regularized incomplete gamma,
//! quantile inversion) is implemented here directly so the numerical
//! behavior is pinned by this crate's own tests.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};
use crate::neural::EpochTrace;

#[derive(Debug)]
pub enum DiagnosticsError {
    Empty,
    LengthMismatch { actual: usize, predicted: usize },
    /// The chi-square plot needs more rows than feature dimensions.
    TooFewRows { n: usize, d: usize },
    SingularCovariance,
    BadProbability(f64),
}

impl fmt::Display for DiagnosticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticsError::Empty => write!(f, "no data points"),
            DiagnosticsError::LengthMismatch { actual, predicted } => write!(
                f,
                "{} actual values but {} predictions",
                actual, predicted
            ),
            DiagnosticsError::TooFewRows { n, d } => {
                write!(f, "need at least d+1 = {} rows, got {}", d + 1, n)
            }
            DiagnosticsError::SingularCovariance => {
                write!(f, "covariance matrix is singular even after regularization")
            }
            DiagnosticsError::BadProbability(p) => {
                write!(f, "probability {} outside (0, 1)", p)
            }
        }
    }
}

impl std::error::Error for DiagnosticsError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Residual,
    PredictionQq,
    Chi2Qq,
    EpochLoss,
}

/// A named scatter/line series plus an optional reference line
/// (slope, intercept), ready for rendering or CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub reference: Option<(f64, f64)>,
}

/// Residuals against fitted values: (ŷᵢ, yᵢ − ŷᵢ) with the zero line.
pub fn residual_series(
    actual: &[f64],
    predicted: &[f64],
    title: &str,
) -> Result<PlotSeries, DiagnosticsError> {
    check_pairs(actual, predicted)?;
    Ok(PlotSeries {
        kind: PlotKind::Residual,
        title: title.to_string(),
        x_label: "predicted".to_string(),
        y_label: "residual".to_string(),
        points: predicted
            .iter()
            .zip(actual)
            .map(|(p, a)| (*p, a - p))
            .collect(),
        reference: Some((0.0, 0.0)),
    })
}

/// Agreement plot: (yᵢ, ŷᵢ) against the 45° line.
pub fn prediction_qq_series(
    actual: &[f64],
    predicted: &[f64],
    title: &str,
) -> Result<PlotSeries, DiagnosticsError> {
    check_pairs(actual, predicted)?;
    Ok(PlotSeries {
        kind: PlotKind::PredictionQq,
        title: title.to_string(),
        x_label: "actual".to_string(),
        y_label: "predicted".to_string(),
        points: actual.iter().zip(predicted).map(|(a, p)| (*a, *p)).collect(),
        reference: Some((1.0, 0.0)),
    })
}

/// Training curve: (epoch, running batch loss).
pub fn epoch_loss_series(traces: &[EpochTrace], title: &str) -> PlotSeries {
    PlotSeries {
        kind: PlotKind::EpochLoss,
        title: title.to_string(),
        x_label: "epoch".to_string(),
        y_label: "loss".to_string(),
        points: traces
            .iter()
            .map(|t| (t.epoch as f64, t.loss))
            .collect(),
        reference: None,
    }
}

fn check_pairs(actual: &[f64], predicted: &[f64]) -> Result<(), DiagnosticsError> {
    if actual.is_empty() {
        return Err(DiagnosticsError::Empty);
    }
    if actual.len() != predicted.len() {
        return Err(DiagnosticsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2QqReport {
    /// True when the covariance needed a ridge bump to become
    /// invertible.
    pub regularized: bool,
    /// Mean squared Mahalanobis distance; identically d(n−1)/n under the
    /// sample-covariance convention, so a useful self-check.
    pub mean_sq_distance: f64,
    pub n: usize,
    pub d: usize,
}

/// Multivariate normality diagnostic: squared Mahalanobis distances
/// (sample covariance, 1/(n−1)) sorted and paired with χ²_d quantiles at
/// probabilities (i − ½)/n. Points near the 45° line support
/// approximate multivariate normality.
pub fn chi2_qq_series(
    x: &Matrix,
    title: &str,
) -> Result<(PlotSeries, Chi2QqReport), DiagnosticsError> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(DiagnosticsError::Empty);
    }
    if n < d + 1 {
        return Err(DiagnosticsError::TooFewRows { n, d });
    }

    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut cov = Matrix::zeros(d, d);
    for i in 0..n {
        let row = x.row(i);
        for a in 0..d {
            let da = row[a] - mean[a];
            for b in a..d {
                let v = cov.get(a, b) + da * (row[b] - mean[b]);
                cov.set(a, b, v);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov.set(a, b, cov.get(b, a));
        }
    }
    for a in 0..d {
        for b in 0..d {
            let v = cov.get(a, b) / (n as f64 - 1.0);
            cov.set(a, b, v);
        }
    }

    let mut regularized = false;
    let inv = match linalg::invert(&cov) {
        Some(inv) => inv,
        None => {
            regularized = true;
            let trace: f64 = (0..d).map(|j| cov.get(j, j)).sum();
            let bump = 1e-8 * trace / d as f64;
            let mut padded = cov.clone();
            for j in 0..d {
                let v = padded.get(j, j) + bump;
                padded.set(j, j, v);
            }
            linalg::invert(&padded).ok_or(DiagnosticsError::SingularCovariance)?
        }
    };

    let mut d2: Vec<f64> = (0..n)
        .map(|i| {
            let centered: Vec<f64> = x.row(i).iter().zip(&mean).map(|(v, m)| v - m).collect();
            let tmp = inv.matvec(&centered);
            linalg::dot(&centered, &tmp)
        })
        .collect();
    let mean_sq_distance = linalg::mean(&d2);
    d2.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));

    let points: Vec<(f64, f64)> = d2
        .iter()
        .enumerate()
        .map(|(i, &obs)| {
            let p = (i as f64 + 0.5) / n as f64;
            (chi2_quantile(d, p).expect("p strictly inside (0,1)"), obs)
        })
        .collect();

    Ok((
        PlotSeries {
            kind: PlotKind::Chi2Qq,
            title: title.to_string(),
            x_label: "chi-square quantile".to_string(),
            y_label: "squared Mahalanobis distance".to_string(),
            points,
            reference: Some((1.0, 0.0)),
        },
        Chi2QqReport {
            regularized,
            mean_sq_distance,
            n,
            d,
        },
    ))
}

/// ln Γ(z) by the Lanczos approximation (g = 7, 9 terms); accurate to
/// ~15 significant digits for positive arguments.
pub fn ln_gamma(z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // reflection: Γ(z)Γ(1−z) = π / sin(πz)
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * z).sin().ln()
            - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized lower incomplete gamma P(a, x): series expansion below
/// a + 1, Lentz continued fraction for the upper tail above it.
pub fn lower_regularized_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a,x) = x^a e^{-x}/Γ(a) · Σ_{k≥0} x^k / (a(a+1)…(a+k))
        let mut term = 1.0 / a;
        let mut sum = term;
        for k in 1..500 {
            term *= x / (a + k as f64);
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * sum).min(1.0)
    } else {
        // Q(a,x) via Lentz's method on the standard continued fraction
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - log_prefix.exp() * h).clamp(0.0, 1.0)
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    assert!(dof >= 1);
    if x <= 0.0 {
        return 0.0;
    }
    lower_regularized_gamma(dof as f64 / 2.0, x / 2.0)
}

/// Standard normal quantile (Acklam's rational approximation), used only
/// to seed the chi-square inversion.
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Inverse chi-square CDF. A Wilson-Hilferty guess brackets the root,
/// then bisection tightens it well past an absolute tolerance of 1e-10
/// (the extra digits matter near zero, where the density is steep).
pub fn chi2_quantile(dof: usize, p: f64) -> Result<f64, DiagnosticsError> {
    if !(0.0 < p && p < 1.0) {
        return Err(DiagnosticsError::BadProbability(p));
    }
    let k = dof as f64;
    let z = normal_quantile(p);
    let wh = k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3);

    let mut lo = 0.0;
    let mut hi = wh.max(1e-8);
    while chi2_cdf(dof, hi) < p {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    while hi - lo > 1e-13 + 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(dof, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pearson correlation of a point series' coordinates.
pub fn pearson(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
