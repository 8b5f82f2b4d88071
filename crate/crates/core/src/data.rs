//! Meteorological data pipeline: raw minute-resolution CSV in, hourly
//! train/test matrices out.
//!
//! Stages: [`parse_csv`] → [`aggregate_hourly`] → [`build_dataset`] →
//! [`split`] → [`Standardizer`]. Each stage is a pure function of its
//! inputs, so the whole pipeline is reproducible bit-for-bit from
//! (file, mapping, seed).
//!
//! Policy choices that the data itself cannot decide:
//! - hourly rows with any remaining missing cell are dropped (the drop
//!   count is surfaced, never hidden);
//! - wind direction is averaged on the circle, not arithmetically;
//! - accumulated precipitation is summed within the hour;
//! - standardization uses the population (1/n) convention and is fitted
//!   on training rows only.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use chrono::{NaiveDateTime, Timelike};
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

/// Canonical name of the response column in prepared artifacts.
pub const TARGET_NAME: &str = "wind_speed_80m";

#[derive(Debug)]
pub enum DataError {
    MissingColumn(String),
    MalformedTimestamp { row: usize, value: String },
    EmptyFile,
    EmptyInput,
    NoCompleteRows,
    DegenerateSplit { n: usize, n_train: usize },
    BadMapping(String),
    Io(std::io::Error),
    Csv(csv::Error),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::MissingColumn(name) => write!(f, "column not found in CSV: {:?}", name),
            DataError::MalformedTimestamp { row, value } => {
                write!(f, "malformed or duplicate timestamp at data row {}: {:?}", row, value)
            }
            DataError::EmptyFile => write!(f, "CSV contains no data rows"),
            DataError::EmptyInput => write!(f, "no rows to aggregate"),
            DataError::NoCompleteRows => {
                write!(f, "every hourly row has at least one missing cell")
            }
            DataError::DegenerateSplit { n, n_train } => write!(
                f,
                "split leaves one side empty (n={}, n_train={})",
                n, n_train
            ),
            DataError::BadMapping(msg) => write!(f, "invalid column mapping: {}", msg),
            DataError::Io(e) => write!(f, "io error: {}", e),
            DataError::Csv(e) => write!(f, "csv error: {}", e),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        DataError::Csv(e)
    }
}

/// Per-column aggregation rule for the minute→hour rollup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggRule {
    Mean,
    /// Vector average for angles in degrees, mapped back to [0, 360).
    CircularMean,
    /// Within-hour sum, for cumulative quantities.
    Sum,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimestampSpec {
    pub column: String,
    /// strftime-style pattern, e.g. "%m/%d/%Y %H:%M".
    pub format: String,
}

/// Maps source CSV columns to canonical feature names and declares how
/// each source column aggregates to hourly resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMapping {
    /// Source column holding the response variable.
    pub target: String,
    /// canonical feature name → source column. Iteration order of this
    /// map fixes the feature order of the prepared dataset.
    pub features: IndexMap<String, String>,
    /// source column → rule; columns not listed default to `mean`.
    #[serde(default)]
    pub aggregation: IndexMap<String, AggRule>,
    pub timestamp: TimestampSpec,
}

impl ColumnMapping {
    pub fn from_json_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path)?;
        let mapping: ColumnMapping = serde_json::from_str(&text)
            .map_err(|e| DataError::BadMapping(e.to_string()))?;
        mapping.validate()?;
        Ok(mapping)
    }

    /// Target mapped exactly once; every canonical feature mapped at most once.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::BadMapping("no features mapped".into()));
        }
        for (canonical, source) in &self.features {
            if source == &self.target {
                return Err(DataError::BadMapping(format!(
                    "feature {:?} maps to the target column {:?}",
                    canonical, self.target
                )));
            }
            if canonical == TARGET_NAME {
                return Err(DataError::BadMapping(format!(
                    "canonical feature name {:?} is reserved for the target",
                    TARGET_NAME
                )));
            }
        }
        let mut seen_sources: HashMap<&str, &str> = HashMap::new();
        for (canonical, source) in &self.features {
            if let Some(prev) = seen_sources.insert(source.as_str(), canonical.as_str()) {
                return Err(DataError::BadMapping(format!(
                    "source column {:?} mapped twice (by {:?} and {:?})",
                    source, prev, canonical
                )));
            }
        }
        Ok(())
    }

    /// Source columns in dataset order: features in map order, target last.
    pub fn source_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.features.values().cloned().collect();
        cols.push(self.target.clone());
        cols
    }

    pub fn rule_for(&self, source: &str) -> AggRule {
        self.aggregation.get(source).copied().unwrap_or(AggRule::Mean)
    }
}

/// Timestamped table of the mapped source columns; cells are fp64 or missing.
/// Timestamps are strictly increasing.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub timestamps: Vec<NaiveDateTime>,
    /// Source column names, in [`ColumnMapping::source_columns`] order.
    pub columns: Vec<String>,
    /// Row-major, aligned with `columns`.
    pub values: Vec<Vec<Option<f64>>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }
}

/// Reads the mapped columns out of an RFC-4180 CSV with a header row.
/// Rows come back sorted by timestamp; cells that do not parse as finite
/// numbers are recorded as missing.
pub fn parse_csv(path: &Path, mapping: &ColumnMapping) -> Result<RawTable, DataError> {
    mapping.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let header_index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();

    let wanted = mapping.source_columns();
    let mut col_idx = Vec::with_capacity(wanted.len());
    for name in &wanted {
        match header_index.get(name.as_str()) {
            Some(&i) => col_idx.push(i),
            None => return Err(DataError::MissingColumn(name.clone())),
        }
    }
    let ts_idx = *header_index
        .get(mapping.timestamp.column.as_str())
        .ok_or_else(|| DataError::MissingColumn(mapping.timestamp.column.clone()))?;

    let mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let ts_raw = record.get(ts_idx).unwrap_or("").trim();
        let ts = NaiveDateTime::parse_from_str(ts_raw, &mapping.timestamp.format).map_err(
            |_| DataError::MalformedTimestamp {
                row: row_no,
                value: ts_raw.to_string(),
            },
        )?;
        let cells = col_idx
            .iter()
            .map(|&i| parse_cell(record.get(i).unwrap_or("")))
            .collect();
        rows.push((ts, cells));
    }
    if rows.is_empty() {
        return Err(DataError::EmptyFile);
    }

    rows.sort_by_key(|(ts, _)| *ts);
    for (i, pair) in rows.windows(2).enumerate() {
        if pair[0].0 == pair[1].0 {
            return Err(DataError::MalformedTimestamp {
                row: i + 1,
                value: format!("duplicate timestamp {}", pair[1].0),
            });
        }
    }

    let (timestamps, values) = rows.into_iter().unzip();
    Ok(RawTable {
        timestamps,
        columns: wanted,
        values,
    })
}

fn parse_cell(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return None;
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Rolls a minute-resolution table up to one row per calendar hour.
///
/// Mean and sum ignore missing cells; an hour whose every cell for some
/// column is missing yields a missing cell for that column.
pub fn aggregate_hourly(raw: &RawTable, mapping: &ColumnMapping) -> Result<RawTable, DataError> {
    if raw.n_rows() == 0 {
        return Err(DataError::EmptyInput);
    }
    let rules: Vec<AggRule> = raw.columns.iter().map(|c| mapping.rule_for(c)).collect();

    let mut out_ts = Vec::new();
    let mut out_vals: Vec<Vec<Option<f64>>> = Vec::new();

    let mut start = 0;
    while start < raw.n_rows() {
        let hour = truncate_to_hour(raw.timestamps[start]);
        let mut end = start + 1;
        while end < raw.n_rows() && truncate_to_hour(raw.timestamps[end]) == hour {
            end += 1;
        }
        let row = (0..raw.columns.len())
            .map(|c| {
                let cells = raw.values[start..end].iter().map(|r| r[c]);
                aggregate_cells(cells, rules[c])
            })
            .collect();
        out_ts.push(hour);
        out_vals.push(row);
        start = end;
    }

    Ok(RawTable {
        timestamps: out_ts,
        columns: raw.columns.clone(),
        values: out_vals,
    })
}

fn truncate_to_hour(ts: NaiveDateTime) -> NaiveDateTime {
    ts.with_minute(0)
        .and_then(|t| t.with_second(0))
        .and_then(|t| t.with_nanosecond(0))
        .expect("minute/second truncation cannot fail")
}

fn aggregate_cells(cells: impl Iterator<Item = Option<f64>>, rule: AggRule) -> Option<f64> {
    let present: Vec<f64> = cells.flatten().collect();
    if present.is_empty() {
        return None;
    }
    match rule {
        AggRule::Mean => Some(present.iter().sum::<f64>() / present.len() as f64),
        AggRule::Sum => Some(present.iter().sum()),
        AggRule::CircularMean => Some(circular_mean_deg(&present)),
    }
}

/// Vector (circular) mean of angles in degrees, result in [0, 360).
pub fn circular_mean_deg(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for a in angles {
        let rad = a.to_radians();
        s += rad.sin();
        c += rad.cos();
    }
    let deg = (s / n).atan2(c / n).to_degrees();
    let wrapped = deg.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 when deg is a tiny negative number
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Column-labeled feature matrix with an aligned response vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Turns an hourly table into a complete-case dataset. Rows with any
/// missing cell are dropped; the second return value is the drop count.
pub fn build_dataset(
    hourly: &RawTable,
    mapping: &ColumnMapping,
) -> Result<(Dataset, usize), DataError> {
    let d = mapping.features.len();
    debug_assert_eq!(hourly.columns.len(), d + 1, "target column is last");

    let mut x_rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut dropped = 0usize;

    for row in &hourly.values {
        if row.iter().any(|c| c.is_none()) {
            dropped += 1;
            continue;
        }
        let vals: Vec<f64> = row.iter().map(|c| c.unwrap()).collect();
        y.push(vals[d]);
        x_rows.push(vals[..d].to_vec());
    }
    if y.is_empty() {
        return Err(DataError::NoCompleteRows);
    }

    Ok((
        Dataset {
            x: Matrix::from_rows(&x_rows),
            y,
            feature_names: mapping.features.keys().cloned().collect(),
        },
        dropped,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Random,
    Chronological,
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Partitions the dataset. |train| = round(ratio·n). Random mode applies
/// a seeded Fisher-Yates permutation and takes the prefix; chronological
/// mode takes the first rows as they stand.
pub fn split(ds: &Dataset, ratio: f64, seed: u64, mode: SplitMode) -> Result<Split, DataError> {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must be in (0, 1)");
    let n = ds.n();
    let n_train = (ratio * n as f64).round() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(DataError::DegenerateSplit { n, n_train });
    }

    let mut order: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
    }
    let train_idx = order[..n_train].to_vec();
    let test_idx = order[n_train..].to_vec();

    Ok(Split {
        train: ds.select_rows(&train_idx),
        test: ds.select_rows(&test_idx),
        train_idx,
        test_idx,
    })
}

/// Per-feature affine transform to zero mean and unit standard deviation,
/// fitted on training rows only. Population (1/n) convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns whose training std collapsed to zero; their std is pinned
    /// to 1 so the transform is the identity shift.
    pub constant_cols: Vec<usize>,
}

impl Standardizer {
    pub fn fit(train: &Dataset) -> Standardizer {
        let n = train.n();
        assert!(n >= 2, "standardizer needs at least two training rows");
        let d = train.d();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            let row = train.x.row(i);
            for j in 0..d {
                mean[j] += row[j];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for i in 0..n {
            let row = train.x.row(i);
            for j in 0..d {
                let delta = row[j] - mean[j];
                var[j] += delta * delta;
            }
        }
        let mut std = vec![0.0; d];
        let mut constant_cols = Vec::new();
        for j in 0..d {
            let s = (var[j] / n as f64).sqrt();
            if s < 1e-12 * (1.0 + mean[j].abs()) {
                std[j] = 1.0;
                constant_cols.push(j);
            } else {
                std[j] = s;
            }
        }
        Standardizer {
            mean,
            std,
            constant_cols,
        }
    }

    pub fn transform(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for i in 0..out.n() {
            let row = out.x.row_mut(i);
            for j in 0..row.len() {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn inverse_transform(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for i in 0..out.n() {
            let row = out.x.row_mut(i);
            for j in 0..row.len() {
                row[j] = row[j] * self.std[j] + self.mean[j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use std::io::Write;

    fn mapping_2f() -> ColumnMapping {
        let mut features = IndexMap::new();
        features.insert("temp".to_string(), "T".to_string());
        features.insert("wind_dir".to_string(), "WD".to_string());
        let mut aggregation = IndexMap::new();
        aggregation.insert("WD".to_string(), AggRule::CircularMean);
        ColumnMapping {
            target: "WS80".to_string(),
            features,
            aggregation,
            timestamp: TimestampSpec {
                column: "time".to_string(),
                format: "%Y-%m-%d %H:%M".to_string(),
            },
        }
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn ts(h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2018, 5, 1)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    fn table(rows: Vec<(NaiveDateTime, Vec<Option<f64>>)>) -> RawTable {
        let (timestamps, values) = rows.into_iter().unzip();
        RawTable {
            timestamps,
            columns: vec!["T".into(), "WD".into(), "WS80".into()],
            values,
        }
    }

    #[test]
    fn parse_csv_three_rows() {
        let f = write_csv(
            "time,T,WD,WS80\n\
             2018-05-01 00:00,1.0,90,5.0\n\
             2018-05-01 00:01,2.0,91,5.5\n\
             2018-05-01 00:02,3.0,92,6.0\n",
        );
        let raw = parse_csv(f.path(), &mapping_2f()).unwrap();
        assert_eq!(raw.n_rows(), 3);
        assert_eq!(raw.columns, vec!["T", "WD", "WS80"]);
        assert_eq!(raw.values[0], vec![Some(1.0), Some(90.0), Some(5.0)]);
    }

    #[test]
    fn parse_csv_missing_target_column() {
        let f = write_csv("time,T,WD\n2018-05-01 00:00,1.0,90\n");
        match parse_csv(f.path(), &mapping_2f()) {
            Err(DataError::MissingColumn(name)) => assert_eq!(name, "WS80"),
            other => panic!("expected MissingColumn, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn parse_csv_nan_cell_is_missing() {
        // oracle: manual parse of the fixture — row 0 has T=NaN (missing),
        // WD=90, WS80=5.0; row 1 fully present
        let f = write_csv(
            "time,T,WD,WS80\n\
             2018-05-01 00:00,NaN,90,5.0\n\
             2018-05-01 00:01,2.0,91,5.5\n",
        );
        let raw = parse_csv(f.path(), &mapping_2f()).unwrap();
        assert_eq!(raw.values[0][0], None);
        assert_eq!(raw.values[0][1], Some(90.0));
        assert_eq!(raw.values[1][0], Some(2.0));
    }

    #[test]
    fn parse_csv_empty_is_error() {
        let f = write_csv("time,T,WD,WS80\n");
        assert!(matches!(
            parse_csv(f.path(), &mapping_2f()),
            Err(DataError::EmptyFile)
        ));
    }

    #[test]
    fn parse_csv_bad_timestamp() {
        let f = write_csv("time,T,WD,WS80\nnot-a-date,1,2,3\n");
        assert!(matches!(
            parse_csv(f.path(), &mapping_2f()),
            Err(DataError::MalformedTimestamp { row: 0, .. })
        ));
    }

    #[test]
    fn parse_csv_sorts_rows_by_timestamp() {
        let f = write_csv(
            "time,T,WD,WS80\n\
             2018-05-01 00:02,3.0,92,6.0\n\
             2018-05-01 00:00,1.0,90,5.0\n",
        );
        let raw = parse_csv(f.path(), &mapping_2f()).unwrap();
        assert_eq!(raw.values[0][0], Some(1.0));
        assert_eq!(raw.values[1][0], Some(3.0));
    }

    #[test]
    fn aggregate_constant_hour() {
        let rows = (0..60)
            .map(|m| (ts(0, m), vec![Some(5.0), Some(10.0), Some(7.0)]))
            .collect();
        let hourly = aggregate_hourly(&table(rows), &mapping_2f()).unwrap();
        assert_eq!(hourly.n_rows(), 1);
        assert_eq!(hourly.values[0][0], Some(5.0));
    }

    #[test]
    fn circular_mean_wraps_north() {
        // {350°, 10°} average to 0°, not 180°
        let rows = vec![
            (ts(0, 0), vec![Some(1.0), Some(350.0), Some(1.0)]),
            (ts(0, 1), vec![Some(1.0), Some(10.0), Some(1.0)]),
        ];
        let hourly = aggregate_hourly(&table(rows), &mapping_2f()).unwrap();
        let dir = hourly.values[0][1].unwrap();
        assert!(dir < 1e-10 || (360.0 - dir) < 1e-10, "dir = {}", dir);
    }

    #[test]
    fn aggregate_two_hours_of_sequential_values() {
        // oracle, by hand: mean(1..=60) = 30.5, mean(61..=120) = 90.5
        let rows = (0..120)
            .map(|i| {
                (
                    ts(i / 60, i % 60),
                    vec![Some((i + 1) as f64), Some(0.0), Some(1.0)],
                )
            })
            .collect();
        let hourly = aggregate_hourly(&table(rows), &mapping_2f()).unwrap();
        assert_eq!(hourly.n_rows(), 2);
        assert_eq!(hourly.values[0][0], Some(30.5));
        assert_eq!(hourly.values[1][0], Some(90.5));
    }

    #[test]
    fn aggregate_sum_rule() {
        let mut mapping = mapping_2f();
        mapping.aggregation.insert("T".to_string(), AggRule::Sum);
        let rows = vec![
            (ts(0, 0), vec![Some(1.5), Some(0.0), Some(1.0)]),
            (ts(0, 1), vec![Some(2.5), Some(0.0), Some(1.0)]),
            (ts(0, 2), vec![None, Some(0.0), Some(1.0)]),
        ];
        let hourly = aggregate_hourly(&table(rows), &mapping).unwrap();
        assert_eq!(hourly.values[0][0], Some(4.0));
    }

    #[test]
    fn aggregate_all_missing_column_stays_missing() {
        let rows = vec![
            (ts(0, 0), vec![None, Some(0.0), Some(1.0)]),
            (ts(0, 1), vec![None, Some(0.0), Some(2.0)]),
        ];
        let hourly = aggregate_hourly(&table(rows), &mapping_2f()).unwrap();
        assert_eq!(hourly.values[0][0], None);
        assert_eq!(hourly.values[0][2], Some(1.5));
    }

    #[test]
    fn build_dataset_drops_incomplete_rows() {
        let mut rows: Vec<(NaiveDateTime, Vec<Option<f64>>)> = (0..10)
            .map(|h| (ts(h, 0), vec![Some(h as f64), Some(1.0), Some(2.0)]))
            .collect();
        rows[3].1[0] = None;
        rows[7].1[2] = None;
        let hourly = table(rows);
        let (ds, dropped) = build_dataset(&hourly, &mapping_2f()).unwrap();
        assert_eq!(ds.n(), 8);
        assert_eq!(dropped, 2);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.feature_names, vec!["temp", "wind_dir"]);
    }

    #[test]
    fn build_dataset_paper_scale_row_count() {
        // 92 days × 24 h of complete hourly rows → n = 2208
        let base = NaiveDate::from_ymd_opt(2018, 5, 1).unwrap();
        let rows: Vec<_> = (0..92 * 24)
            .map(|i| {
                let day = base + chrono::Duration::days(i / 24);
                let t = day.and_hms_opt((i % 24) as u32, 0, 0).unwrap();
                (t, vec![Some(1.0), Some(2.0), Some(3.0)])
            })
            .collect();
        let (ds, dropped) = build_dataset(&table(rows), &mapping_2f()).unwrap();
        assert_eq!(ds.n(), 92 * 24);
        assert_eq!(ds.n(), 2208);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn build_dataset_no_complete_rows() {
        let rows = vec![(ts(0, 0), vec![None, Some(1.0), Some(2.0)])];
        assert!(matches!(
            build_dataset(&table(rows), &mapping_2f()),
            Err(DataError::NoCompleteRows)
        ));
    }

    fn toy_dataset(n: usize) -> Dataset {
        Dataset {
            x: Matrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64),
            y: (0..n).map(|i| i as f64).collect(),
            feature_names: vec!["a".into(), "b".into()],
        }
    }

    #[test]
    fn chronological_split_takes_prefix() {
        let ds = toy_dataset(10);
        let s = split(&ds, 0.8, 0, SplitMode::Chronological).unwrap();
        assert_eq!(s.train_idx, (0..8).collect::<Vec<_>>());
        assert_eq!(s.test_idx, vec![8, 9]);
        assert_eq!(s.train.y, (0..8).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_counts_at_paper_scale() {
        // round(0.8 · 2208) = 1766
        let ds = toy_dataset(2208);
        let s = split(&ds, 0.8, 7, SplitMode::Random).unwrap();
        assert_eq!(s.train.n(), 1766);
        assert_eq!(s.test.n(), 442);
    }

    #[test]
    fn split_same_seed_identical() {
        let ds = toy_dataset(50);
        let a = split(&ds, 0.7, 123, SplitMode::Random).unwrap();
        let b = split(&ds, 0.7, 123, SplitMode::Random).unwrap();
        assert_eq!(a.train_idx, b.train_idx);
        assert_eq!(a.test_idx, b.test_idx);
    }

    #[test]
    fn split_rejects_degenerate() {
        let ds = toy_dataset(2);
        assert!(matches!(
            split(&ds, 0.1, 0, SplitMode::Random),
            Err(DataError::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn standardizer_hand_computed_column() {
        // column {1,2,3}: mean 2, population std sqrt(2/3) → ±1.224744871391589
        let ds = Dataset {
            x: Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]),
            y: vec![0.0; 3],
            feature_names: vec!["a".into()],
        };
        let std = Standardizer::fit(&ds);
        assert!((std.mean[0] - 2.0).abs() < 1e-15);
        assert!((std.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let t = std.transform(&ds);
        assert!((t.x.get(0, 0) + 1.224744871391589).abs() < 1e-12);
        assert!(t.x.get(1, 0).abs() < 1e-15);
        assert!((t.x.get(2, 0) - 1.224744871391589).abs() < 1e-12);
    }

    #[test]
    fn standardizer_constant_column_flagged() {
        let ds = Dataset {
            x: Matrix::from_rows(&[vec![5.0], vec![5.0], vec![5.0]]),
            y: vec![0.0; 3],
            feature_names: vec!["a".into()],
        };
        let std = Standardizer::fit(&ds);
        assert_eq!(std.constant_cols, vec![0]);
        assert_eq!(std.std[0], 1.0);
        let t = std.transform(&ds);
        for i in 0..3 {
            assert_eq!(t.x.get(i, 0), 0.0);
        }
    }

    #[test]
    fn standardizer_not_idempotent() {
        let ds = Dataset {
            x: Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]),
            y: vec![0.0; 3],
            feature_names: vec!["a".into()],
        };
        let std = Standardizer::fit(&ds);
        let once = std.transform(&ds);
        let twice = std.transform(&once);
        assert!((once.x.get(0, 0) - twice.x.get(0, 0)).abs() > 1e-6);
    }

    #[test]
    fn train_columns_standardized_test_uses_train_params() {
        let train = toy_dataset(20);
        let std = Standardizer::fit(&train);
        let t = std.transform(&train);
        for j in 0..t.d() {
            let col = t.x.column(j);
            let m = crate::linalg::mean(&col);
            let v = crate::linalg::variance(&col);
            assert!(m.abs() < 1e-10, "col {} mean {}", j, m);
            assert!((v - 1.0).abs() < 1e-10, "col {} var {}", j, v);
        }
        // a test row transforms with the train parameters, not its own
        let test = Dataset {
            x: Matrix::from_rows(&[vec![100.0, 100.0]]),
            y: vec![0.0],
            feature_names: train.feature_names.clone(),
        };
        let tt = std.transform(&test);
        assert!((tt.x.get(0, 0) - (100.0 - std.mean[0]) / std.std[0]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(
            n in 2usize..200,
            seed in any::<u64>(),
            ratio in 0.05f64..0.95,
            chronological in any::<bool>(),
        ) {
            let ds = toy_dataset(n);
            let mode = if chronological { SplitMode::Chronological } else { SplitMode::Random };
            match split(&ds, ratio, seed, mode) {
                Ok(s) => {
                    let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                    prop_assert_eq!(s.train.n() + s.test.n(), n);
                }
                Err(DataError::DegenerateSplit { n_train, .. }) => {
                    prop_assert!(n_train == 0 || n_train >= n);
                }
                Err(e) => prop_assert!(false, "unexpected error {:?}", e),
            }
        }

        #[test]
        fn circular_mean_of_single_angle_is_identity(angle in 0.0f64..720.0) {
            let m = circular_mean_deg(&[angle]);
            let expected = angle.rem_euclid(360.0);
            let diff = (m - expected).abs();
            let wrapped = diff.min(360.0 - diff);
            prop_assert!(wrapped < 1e-9, "angle {} -> {}", angle, m);
        }

        #[test]
        fn standardizer_round_trip(rows in proptest::collection::vec(
            proptest::collection::vec(-1e3f64..1e3, 3), 2..40,
        )) {
            let n = rows.len();
            let ds = Dataset {
                x: Matrix::from_rows(&rows),
                y: vec![0.0; n],
                feature_names: vec!["a".into(), "b".into(), "c".into()],
            };
            let std = Standardizer::fit(&ds);
            let back = std.inverse_transform(&std.transform(&ds));
            for i in 0..n {
                for j in 0..3 {
                    let orig = ds.x.get(i, j);
                    let round = back.x.get(i, j);
                    let tol = 1e-12 * orig.abs().max(1.0);
                    prop_assert!((orig - round).abs() <= tol);
                }
            }
        }

        #[test]
        fn hourly_row_count_equals_distinct_hours(
            minutes in proptest::collection::btree_set(0u32..(24 * 60), 1..100),
        ) {
            let rows: Vec<_> = minutes
                .iter()
                .map(|&m| (ts(m / 60, m % 60), vec![Some(1.0), Some(2.0), Some(3.0)]))
                .collect();
            let distinct_hours: std::collections::BTreeSet<u32> =
                minutes.iter().map(|m| m / 60).collect();
            let hourly = aggregate_hourly(&table(rows), &mapping_2f()).unwrap();
            prop_assert_eq!(hourly.n_rows(), distinct_hours.len());
        }
    }
}
