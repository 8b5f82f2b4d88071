//! Seeded synthetic benchmark data shaped like the real inputs: an hourly
//! CSV plus a matching column-mapping JSON.
//!
//! The response is a smooth nonlinear function of the first five features
//! (sinusoidal interaction, quadratic bump, two linear terms) with additive
//! Gaussian noise scaled to a fraction of the signal's standard deviation.
//! The remaining features are pure distractors. This keeps the target
//! learnable by both tree ensembles and networks while exercising every
//! stage of the data pipeline.

use std::fmt;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

#[derive(Debug)]
pub enum SynthError {
    /// The response formula consumes five features.
    TooFewFeatures { got: usize },
    NoRows,
    Io(std::io::Error),
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::TooFewFeatures { got } => {
                write!(f, "need at least 5 features, got {}", got)
            }
            SynthError::NoRows => write!(f, "n_hours must be positive"),
            SynthError::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl std::error::Error for SynthError {}

impl From<std::io::Error> for SynthError {
    fn from(e: std::io::Error) -> Self {
        SynthError::Io(e)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub n_hours: usize,
    pub n_features: usize,
    pub seed: u64,
    /// Noise standard deviation as a fraction of the signal's.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_hours: 2208,
            n_features: 17,
            seed: 7,
            noise: 0.1,
        }
    }
}

pub struct SynthData {
    pub csv: String,
    pub mapping_json: String,
}

fn squash(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Renders the dataset and its mapping as strings; byte-identical for
/// identical configs.
pub fn generate(config: &SynthConfig) -> Result<SynthData, SynthError> {
    let (n, d) = (config.n_hours, config.n_features);
    if d < 5 {
        return Err(SynthError::TooFewFeatures { got: d });
    }
    if n == 0 {
        return Err(SynthError::NoRows);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let offset_dist = Uniform::new(-5.0, 25.0).expect("static bounds");
    let scale_dist = Uniform::new(0.5, 10.0).expect("static bounds");
    let normal = StandardNormal;

    // per-column affine disguise so the raw CSV is not already standardized
    let offsets: Vec<f64> = (0..d).map(|_| offset_dist.sample(&mut rng)).collect();
    let scales: Vec<f64> = (0..d).map(|_| scale_dist.sample(&mut rng)).collect();

    let mut z = vec![vec![0.0f64; d]; n];
    for row in &mut z {
        for cell in row.iter_mut() {
            *cell = normal.sample(&mut rng);
        }
    }

    let signal: Vec<f64> = z
        .iter()
        .map(|row| {
            let u: Vec<f64> = row[..5].iter().map(|&v| squash(v)).collect();
            10.0 * (PI * u[0] * u[1]).sin() + 20.0 * (u[2] - 0.5).powi(2) + 10.0 * u[3]
                + 5.0 * u[4]
        })
        .collect();
    let noise_scale = config.noise * crate::linalg::variance(&signal).sqrt();
    let y: Vec<f64> = signal
        .iter()
        .map(|s| {
            let eps: f64 = normal.sample(&mut rng);
            s + noise_scale * eps
        })
        .collect();

    let start = NaiveDate::from_ymd_opt(2018, 5, 1)
        .expect("static date")
        .and_hms_opt(0, 0, 0)
        .expect("static time");

    let mut csv = String::from("timestamp");
    for j in 0..d {
        csv.push_str(&format!(",sensor_{:02}", j + 1));
    }
    csv.push_str(",wind_speed_80m\n");
    for (i, row) in z.iter().enumerate() {
        let ts = start + chrono::Duration::hours(i as i64);
        csv.push_str(&ts.format("%Y-%m-%d %H:%M:%S").to_string());
        for j in 0..d {
            csv.push_str(&format!(",{:.6}", offsets[j] + scales[j] * row[j]));
        }
        csv.push_str(&format!(",{:.6}\n", y[i]));
    }

    let mut features = indexmap::IndexMap::new();
    for j in 0..d {
        features.insert(format!("feature_{:02}", j + 1), format!("sensor_{:02}", j + 1));
    }
    let mapping = crate::data::ColumnMapping {
        target: "wind_speed_80m".to_string(),
        features,
        aggregation: indexmap::IndexMap::new(),
        timestamp: crate::data::TimestampSpec {
            column: "timestamp".to_string(),
            format: "%Y-%m-%d %H:%M:%S".to_string(),
        },
    };
    let mapping_json =
        serde_json::to_string_pretty(&mapping).expect("mapping serialization cannot fail");

    Ok(SynthData { csv, mapping_json })
}

/// Writes `data.csv` and `mapping.json` under `dir`; returns their paths.
pub fn write_files(dir: &Path, config: &SynthConfig) -> Result<(PathBuf, PathBuf), SynthError> {
    let data = generate(config)?;
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("data.csv");
    let mapping_path = dir.join("mapping.json");
    std::fs::write(&csv_path, data.csv)?;
    std::fs::write(&mapping_path, data.mapping_json)?;
    Ok((csv_path, mapping_path))
}
