//! Regression accuracy measures: MAE, MSE, MedAE, and the coefficient of
//! determination R².
//!
//! All four operate on paired slices of actual and predicted values. R²
//! uses the mean of the actual values in its denominator (the standard
//! definition); a zero-variance target is reported as an error rather
//! than silently returning 0.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricsError {
    LengthMismatch { actual: usize, predicted: usize },
    Empty,
    /// Var(y) = 0 makes R² undefined.
    ZeroVariance,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::LengthMismatch { actual, predicted } => write!(
                f,
                "length mismatch: {} actual vs {} predicted values",
                actual, predicted
            ),
            MetricsError::Empty => write!(f, "empty input"),
            MetricsError::ZeroVariance => {
                write!(f, "target has zero variance; R2 is undefined")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

fn check_pair(y: &[f64], y_hat: &[f64]) -> Result<(), MetricsError> {
    if y.len() != y_hat.len() {
        return Err(MetricsError::LengthMismatch {
            actual: y.len(),
            predicted: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Mean absolute error: Σ|yᵢ − ŷᵢ| / n.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y, y_hat)?;
    let sum: f64 = y.iter().zip(y_hat).map(|(a, p)| (a - p).abs()).sum();
    Ok(sum / y.len() as f64)
}

/// Mean squared error: Σ(yᵢ − ŷᵢ)² / n.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y, y_hat)?;
    let sum: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(sum / y.len() as f64)
}

/// Median absolute error. Even n takes the midpoint of the two middle
/// order statistics.
pub fn medae(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y, y_hat)?;
    let mut abs_errors: Vec<f64> = y.iter().zip(y_hat).map(|(a, p)| (a - p).abs()).collect();
    abs_errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = abs_errors.len();
    if n % 2 == 1 {
        Ok(abs_errors[n / 2])
    } else {
        Ok((abs_errors[n / 2 - 1] + abs_errors[n / 2]) / 2.0)
    }
}

/// R² = 1 − Σ(yᵢ − ŷᵢ)² / Σ(yᵢ − ȳ)², with ȳ the mean of the actual values.
pub fn r2(y: &[f64], y_hat: &[f64]) -> Result<f64, MetricsError> {
    check_pair(y, y_hat)?;
    if y.len() < 2 {
        return Err(MetricsError::Empty);
    }
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - y_mean) * (a - y_mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let ss_res: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// MAE/MSE/MedAE/R² for one model on one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_id: String,
    pub split_id: String,
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub medae: f64,
    /// `None` when the target had zero variance on the split.
    pub r2: Option<f64>,
}

impl MetricsReport {
    pub fn compute(
        model_id: &str,
        split_id: &str,
        y: &[f64],
        y_hat: &[f64],
    ) -> Result<Self, MetricsError> {
        let r2_value = match r2(y, y_hat) {
            Ok(v) => Some(v),
            Err(MetricsError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        Ok(MetricsReport {
            model_id: model_id.to_string(),
            split_id: split_id.to_string(),
            n: y.len(),
            mae: mae(y, y_hat)?,
            mse: mse(y, y_hat)?,
            medae: medae(y, y_hat)?,
            r2: r2_value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_is_zero_error_and_unit_r2() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(medae(&y, &y).unwrap(), 0.0);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn mae_of_unit_errors() {
        // errors {1, -1} -> MAE 1
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn mse_of_unit_errors() {
        assert_eq!(mse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn medae_single_pair() {
        assert_eq!(medae(&[3.0], &[5.0]).unwrap(), 2.0);
    }

    #[test]
    fn medae_ignores_outlier() {
        // |errors| = {1, 2, 100} -> median 2
        let y = vec![0.0, 0.0, 0.0];
        let y_hat = vec![1.0, 2.0, 100.0];
        assert_eq!(medae(&y, &y_hat).unwrap(), 2.0);
    }

    #[test]
    fn medae_even_count_takes_midpoint() {
        // |errors| = {1, 2, 3, 4} -> (2+3)/2
        let y = vec![0.0, 0.0, 0.0, 0.0];
        let y_hat = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(medae(&y, &y_hat).unwrap(), 2.5);
    }

    #[test]
    fn r2_of_mean_predictor_is_zero() {
        let y = vec![1.0, 2.0, 3.0, 6.0];
        let mean = 3.0;
        let y_hat = vec![mean; 4];
        assert!(r2(&y, &y_hat).unwrap().abs() < 1e-15);
    }

    #[test]
    fn r2_zero_variance_is_error() {
        let y = vec![5.0, 5.0, 5.0];
        let y_hat = vec![5.0, 5.1, 4.9];
        assert_eq!(r2(&y, &y_hat), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            mae(&[1.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert_eq!(mse(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn report_collects_all_four() {
        let y = vec![1.0, 2.0, 3.0];
        let y_hat = vec![1.5, 2.0, 2.5];
        let rep = MetricsReport::compute("m", "test", &y, &y_hat).unwrap();
        assert_eq!(rep.n, 3);
        assert!((rep.mae - (0.5 + 0.0 + 0.5) / 3.0).abs() < 1e-15);
        assert!(rep.r2.is_some());
    }
}
