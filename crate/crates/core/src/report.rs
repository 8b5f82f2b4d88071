//! Benchmark result tables in Markdown and CSV.
//!
//! Column order is fixed (model number, algorithm, MAE, MSE, MedAE, R²)
//! and rows are emitted exactly in the order given, so repeated runs of
//! the same configuration produce byte-identical files.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::neural::EpochTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_number: usize,
    pub algorithm: String,
    pub mae: f64,
    pub mse: f64,
    pub medae: f64,
    /// None when the evaluation split had zero target variance.
    pub r2: Option<f64>,
    /// Caveats worth surfacing next to the numbers (fallbacks, early
    /// stops, non-convergence).
    pub notes: Vec<String>,
}

/// Markdown table with three-decimal metrics, matching the usual
/// presentation of regression benchmarks.
pub fn to_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str("| Model | Algorithm | MAE | MSE | MedAE | R2 |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for row in rows {
        let r2 = row
            .r2
            .map(|v| format!("{:.3}", v))
            .unwrap_or_else(|| "n/a".to_string());
        let mut algorithm = row.algorithm.clone();
        if !row.notes.is_empty() {
            write!(algorithm, " ({})", row.notes.join("; ")).unwrap();
        }
        writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} | {:.3} | {} |",
            row.model_number, algorithm, row.mae, row.mse, row.medae, r2
        )
        .unwrap();
    }
    out
}

/// CSV with full float precision for downstream tooling and
/// reproducibility comparisons.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("model,algorithm,mae,mse,medae,r2,notes\n");
    for row in rows {
        let r2 = row.r2.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.model_number,
            csv_field(&row.algorithm),
            row.mae,
            row.mse,
            row.medae,
            r2,
            csv_field(&row.notes.join("; "))
        )
        .unwrap();
    }
    out
}

/// Training curve as CSV (epoch, running loss, end-of-epoch MSE).
pub fn epoch_trace_csv(traces: &[EpochTrace]) -> String {
    let mut out = String::from("epoch,loss,mse\n");
    for t in traces {
        writeln!(out, "{},{},{}", t.epoch, t.loss, t.mse).unwrap();
    }
    out
}

fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}
