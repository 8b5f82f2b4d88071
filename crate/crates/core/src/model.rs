//! The twelve-model benchmark roster and a unified fitted-model type
//! with persistence.
//!
//! Classic models serialize as single JSON files. Networks split into a
//! JSON architecture manifest and a little-endian binary tensor table
//! (`[u64 n_tensors]` then per tensor `[u64 name_len][name][u64 count]
//! [count × f64]`), since weight blobs have no business being JSON.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::linear::LinearModel;
use crate::neural::{LayerSpec, Network};
use crate::svr::SvrModel;
use crate::tree::{AdaBoost, Forest};

#[derive(Debug)]
pub enum ModelError {
    Io(io::Error),
    Json(serde_json::Error),
    /// Tensor table is malformed (truncated, wrong counts, bad UTF-8).
    Format(String),
    /// Manifest and tensor table disagree with each other.
    Incompatible(String),
    UnknownModel(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Io(e) => write!(f, "io error: {}", e),
            ModelError::Json(e) => write!(f, "json error: {}", e),
            ModelError::Format(msg) => write!(f, "bad tensor table: {}", msg),
            ModelError::Incompatible(msg) => write!(f, "model files disagree: {}", msg),
            ModelError::UnknownModel(name) => write!(f, "unknown model: {:?}", name),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<io::Error> for ModelError {
    fn from(e: io::Error) -> Self {
        ModelError::Io(e)
    }
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Json(e)
    }
}

/// The benchmark lineup, numbered 1 through 12 in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Ridge,
    Lasso,
    BayesianRidge,
    Huber,
    Bagging,
    RandomForest,
    AdaBoost,
    Svr,
    Dnn,
    Cnn,
    Lstm,
}

impl ModelKind {
    pub fn all() -> [ModelKind; 12] {
        [
            ModelKind::Linear,
            ModelKind::Ridge,
            ModelKind::Lasso,
            ModelKind::BayesianRidge,
            ModelKind::Huber,
            ModelKind::Bagging,
            ModelKind::RandomForest,
            ModelKind::AdaBoost,
            ModelKind::Svr,
            ModelKind::Dnn,
            ModelKind::Cnn,
            ModelKind::Lstm,
        ]
    }

    pub fn number(self) -> usize {
        ModelKind::all().iter().position(|k| *k == self).unwrap() + 1
    }

    pub fn from_number(n: usize) -> Option<ModelKind> {
        ModelKind::all().get(n.checked_sub(1)?).copied()
    }

    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Ridge => "ridge",
            ModelKind::Lasso => "lasso",
            ModelKind::BayesianRidge => "bayesian-ridge",
            ModelKind::Huber => "huber",
            ModelKind::Bagging => "bagging",
            ModelKind::RandomForest => "random-forest",
            ModelKind::AdaBoost => "adaboost",
            ModelKind::Svr => "svr",
            ModelKind::Dnn => "dnn",
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn algorithm_name(self) -> &'static str {
        match self {
            ModelKind::Linear => "Multiple linear regression",
            ModelKind::Ridge => "Ridge regression",
            ModelKind::Lasso => "Lasso regression",
            ModelKind::BayesianRidge => "Bayesian ridge regression",
            ModelKind::Huber => "Huber regression",
            ModelKind::Bagging => "Bagging regression",
            ModelKind::RandomForest => "Random forest regression",
            ModelKind::AdaBoost => "AdaBoost regression",
            ModelKind::Svr => "Support vector regression",
            ModelKind::Dnn => "Deep neural network (MLP)",
            ModelKind::Cnn => "1D convolutional neural network",
            ModelKind::Lstm => "LSTM recurrent network",
        }
    }

    /// Accepts a report number ("7") or a slug ("random-forest").
    pub fn parse(token: &str) -> Result<ModelKind, ModelError> {
        if let Ok(n) = token.parse::<usize>() {
            return ModelKind::from_number(n)
                .ok_or_else(|| ModelError::UnknownModel(token.to_string()));
        }
        ModelKind::all()
            .into_iter()
            .find(|k| k.slug() == token)
            .ok_or_else(|| ModelError::UnknownModel(token.to_string()))
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Dnn | ModelKind::Cnn | ModelKind::Lstm)
    }
}

/// Affine target scaling used by the network wrappers, which train on
/// standardized targets and decode on the way out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaler {
    /// Population standard deviation; a (near-)constant target pins the
    /// scale at 1 so encoding stays invertible.
    pub fn fit(y: &[f64]) -> TargetScaler {
        let mean = crate::linalg::mean(y);
        let std = crate::linalg::variance(y).sqrt();
        TargetScaler {
            mean,
            std: if std < 1e-12 { 1.0 } else { std },
        }
    }

    pub fn encode(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| v * self.std + self.mean).collect()
    }
}

/// Reshapes standardized feature rows into the per-sample layout each
/// network family expects: 1×d rows for the dense and recurrent models,
/// a d×1 single-channel sequence for the convolutional one.
pub fn shape_samples(kind: ModelKind, x: &Matrix) -> Vec<Matrix> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            match kind {
                ModelKind::Cnn => Matrix::from_fn(row.len(), 1, |t, _| row[t]),
                _ => Matrix::from_rows(&[row.to_vec()]),
            }
        })
        .collect()
}

/// Any trained model from the roster, with a uniform prediction API on
/// standardized feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear {
        kind: ModelKind,
        model: LinearModel,
    },
    Forest {
        kind: ModelKind,
        model: Forest,
    },
    AdaBoost {
        model: AdaBoost,
    },
    Svr {
        model: SvrModel,
    },
    Neural {
        kind: ModelKind,
        network: Network,
        target_scaler: TargetScaler,
    },
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Linear { kind, .. } => *kind,
            FittedModel::Forest { kind, .. } => *kind,
            FittedModel::AdaBoost { .. } => ModelKind::AdaBoost,
            FittedModel::Svr { .. } => ModelKind::Svr,
            FittedModel::Neural { kind, .. } => *kind,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        match self {
            FittedModel::Linear { model, .. } => model.predict(x),
            FittedModel::Forest { model, .. } => model.predict(x),
            FittedModel::AdaBoost { model } => model.predict(x),
            FittedModel::Svr { model } => model.predict(x),
            FittedModel::Neural {
                kind,
                network,
                target_scaler,
            } => {
                let samples = shape_samples(*kind, x);
                target_scaler.decode(&network.predict_batch(&samples))
            }
        }
    }

    /// Writes `<slug>.json` for classic models, or `<slug>.manifest.json`
    /// plus `<slug>.tensors.bin` for networks. Returns the paths written.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>, ModelError> {
        let slug = self.kind().slug();
        match self {
            FittedModel::Neural {
                kind,
                network,
                target_scaler,
            } => {
                let manifest = NeuralManifest {
                    kind: *kind,
                    layers: network.specs(),
                    target_scaler: *target_scaler,
                };
                let manifest_path = dir.join(format!("{}.manifest.json", slug));
                fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

                let tensors: Vec<(String, &[f64])> = network
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (format!("layer{}", i), l.params.as_slice()))
                    .collect();
                let tensor_path = dir.join(format!("{}.tensors.bin", slug));
                write_tensor_table(&tensor_path, &tensors)?;
                Ok(vec![manifest_path, tensor_path])
            }
            classic => {
                let payload = match classic {
                    FittedModel::Linear { kind, model } => ClassicPayload::Linear {
                        kind: *kind,
                        model: model.clone(),
                    },
                    FittedModel::Forest { kind, model } => ClassicPayload::Forest {
                        kind: *kind,
                        model: model.clone(),
                    },
                    FittedModel::AdaBoost { model } => ClassicPayload::AdaBoost {
                        model: model.clone(),
                    },
                    FittedModel::Svr { model } => ClassicPayload::Svr {
                        model: model.clone(),
                    },
                    FittedModel::Neural { .. } => unreachable!(),
                };
                let path = dir.join(format!("{}.json", slug));
                fs::write(&path, serde_json::to_string(&payload)?)?;
                Ok(vec![path])
            }
        }
    }

    /// Inverse of [`FittedModel::save`] for the given roster entry.
    pub fn load(dir: &Path, kind: ModelKind) -> Result<FittedModel, ModelError> {
        let slug = kind.slug();
        if kind.is_neural() {
            let manifest_path = dir.join(format!("{}.manifest.json", slug));
            let manifest: NeuralManifest =
                serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
            if manifest.kind != kind {
                return Err(ModelError::Incompatible(format!(
                    "manifest describes {:?}, expected {:?}",
                    manifest.kind, kind
                )));
            }
            let mut network = Network::from_specs(manifest.layers);
            let tensors = read_tensor_table(&dir.join(format!("{}.tensors.bin", slug)))?;
            if tensors.len() != network.layers.len() {
                return Err(ModelError::Incompatible(format!(
                    "{} tensors for {} layers",
                    tensors.len(),
                    network.layers.len()
                )));
            }
            for (i, (layer, (name, data))) in
                network.layers.iter_mut().zip(tensors).enumerate()
            {
                if name != format!("layer{}", i) {
                    return Err(ModelError::Incompatible(format!(
                        "tensor {} named {:?}",
                        i, name
                    )));
                }
                if data.len() != layer.n_params() {
                    return Err(ModelError::Incompatible(format!(
                        "tensor {:?} holds {} values, layer needs {}",
                        name,
                        data.len(),
                        layer.n_params()
                    )));
                }
                layer.params = data;
            }
            Ok(FittedModel::Neural {
                kind,
                network,
                target_scaler: manifest.target_scaler,
            })
        } else {
            let path = dir.join(format!("{}.json", slug));
            let payload: ClassicPayload = serde_json::from_str(&fs::read_to_string(path)?)?;
            Ok(match payload {
                ClassicPayload::Linear { kind, model } => FittedModel::Linear { kind, model },
                ClassicPayload::Forest { kind, model } => FittedModel::Forest { kind, model },
                ClassicPayload::AdaBoost { model } => FittedModel::AdaBoost { model },
                ClassicPayload::Svr { model } => FittedModel::Svr { model },
            })
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum ClassicPayload {
    Linear { kind: ModelKind, model: LinearModel },
    Forest { kind: ModelKind, model: Forest },
    AdaBoost { model: AdaBoost },
    Svr { model: SvrModel },
}

#[derive(Serialize, Deserialize)]
struct NeuralManifest {
    kind: ModelKind,
    layers: Vec<LayerSpec>,
    target_scaler: TargetScaler,
}

/// Writes named f64 tensors in the little-endian length-prefixed layout
/// described in the module docs.
pub fn write_tensor_table(path: &Path, tensors: &[(String, &[f64])]) -> Result<(), ModelError> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, data) in tensors {
        let bytes = name.as_bytes();
        file.write_all(&(bytes.len() as u64).to_le_bytes())?;
        file.write_all(bytes)?;
        file.write_all(&(data.len() as u64).to_le_bytes())?;
        for v in *data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    file.flush()?;
    Ok(())
}

pub fn read_tensor_table(path: &Path) -> Result<Vec<(String, Vec<f64>)>, ModelError> {
    let mut file = io::BufReader::new(fs::File::open(path)?);
    let n = read_u64(&mut file)? as usize;
    // a table cannot be larger than its file; reject absurd counts early
    if n > 1 << 20 {
        return Err(ModelError::Format(format!("implausible tensor count {}", n)));
    }
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let name_len = read_u64(&mut file)? as usize;
        if name_len > 4096 {
            return Err(ModelError::Format(format!(
                "implausible name length {}",
                name_len
            )));
        }
        let mut name_bytes = vec![0u8; name_len];
        file.read_exact(&mut name_bytes)
            .map_err(|_| ModelError::Format("truncated tensor name".into()))?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?;
        let count = read_u64(&mut file)? as usize;
        let mut data = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            file.read_exact(&mut buf)
                .map_err(|_| ModelError::Format(format!("truncated tensor {:?}", name)))?;
            data.push(f64::from_le_bytes(buf));
        }
        tensors.push((name, data));
    }
    let mut trailing = [0u8; 1];
    if file.read(&mut trailing)? != 0 {
        return Err(ModelError::Format("trailing bytes after tensor table".into()));
    }
    Ok(tensors)
}

fn read_u64(file: &mut impl Read) -> Result<u64, ModelError> {
    let mut buf = [0u8; 8];
    file.read_exact(&mut buf)
        .map_err(|_| ModelError::Format("truncated length field".into()))?;
    Ok(u64::from_le_bytes(buf))
}
