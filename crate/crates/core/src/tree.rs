//! Tree-based regressors: a single CART tree grown by variance
//! reduction, bootstrap-aggregated trees, random forests (per-node
//! feature subsampling), and AdaBoost.R2 boosting with the linear loss.
//!
//! Determinism contract: all randomness flows through per-tree
//! `ChaCha8Rng` streams derived from the caller's seed (tree t uses
//! `seed ^ t`), so a fit is a pure function of (data, config, seed).
//! Split ties — gains equal up to a small relative tolerance — resolve
//! to the lowest feature index, then the lowest threshold.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug)]
pub enum TreeError {
    EmptyInput,
    DimensionMismatch { rows: usize, targets: usize },
    BadWeights(String),
    /// AdaBoost.R2 rejected the very first round (average loss ≥ 1/2),
    /// so no ensemble exists.
    AllRoundsRejected,
}

impl fmt::Display for TreeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeError::EmptyInput => write!(f, "cannot fit a tree on zero rows"),
            TreeError::DimensionMismatch { rows, targets } => write!(
                f,
                "design matrix has {} rows but target has {} entries",
                rows, targets
            ),
            TreeError::BadWeights(msg) => write!(f, "invalid sample weights: {}", msg),
            TreeError::AllRoundsRejected => {
                write!(f, "boosting rejected every round; base learner is too weak")
            }
        }
    }
}

impl std::error::Error for TreeError {}

/// Phantom-gain guard: improvements below this fraction of the node's
/// weighted SSE are treated as floating-point noise, not structure.
const GAIN_FLOOR: f64 = 1e-12;

/// Candidates whose gains differ by less than this fraction of the
/// node's weighted SSE count as tied, and the incumbent (lowest feature,
/// lowest threshold) wins. The same partition reached through two sort
/// orders accumulates different rounding, so a bitwise comparison would
/// let that noise pick the winner.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if row[*feature] <= *threshold {
                    left.predict_row(row)
                } else {
                    right.predict_row(row)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// None grows until purity or the minimum-size rules stop it.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features considered per node. None means all; fewer than all
    /// requires an RNG at fit time.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.root.predict_row(x.row(i))).collect()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn n_leaves(&self) -> usize {
        self.root.n_leaves()
    }
}

/// Grows a CART regression tree by greedy weighted-variance reduction.
/// Split candidates are the midpoints between consecutive distinct
/// sorted values of each considered feature.
pub fn fit_tree(
    x: &Matrix,
    y: &[f64],
    sample_weight: Option<&[f64]>,
    config: &TreeConfig,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<RegressionTree, TreeError> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(TreeError::EmptyInput);
    }
    if n != y.len() {
        return Err(TreeError::DimensionMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    let uniform = vec![1.0; n];
    let w = match sample_weight {
        Some(w) => {
            if w.len() != n {
                return Err(TreeError::BadWeights(format!(
                    "{} weights for {} rows",
                    w.len(),
                    n
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(TreeError::BadWeights("negative or non-finite weight".into()));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(TreeError::BadWeights("weights sum to zero".into()));
            }
            w
        }
        None => &uniform,
    };
    let k = config.max_features.unwrap_or(x.cols()).min(x.cols());
    assert!(k >= 1, "must consider at least one feature per node");
    assert!(
        k == x.cols() || rng.is_some(),
        "feature subsampling requires an RNG"
    );

    let indices: Vec<usize> = (0..n).collect();
    let root = build_node(x, y, w, &indices, 0, config, k, &mut rng);
    Ok(RegressionTree {
        root,
        n_features: x.cols(),
    })
}

fn build_node(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    indices: &[usize],
    depth: usize,
    config: &TreeConfig,
    k_features: usize,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Node {
    let w_total: f64 = indices.iter().map(|&i| w[i]).sum();
    let mean = if w_total > 0.0 {
        indices.iter().map(|&i| w[i] * y[i]).sum::<f64>() / w_total
    } else {
        0.0
    };
    let leaf = Node::Leaf { value: mean };

    if indices.len() < config.min_samples_split || indices.len() < 2 * config.min_samples_leaf {
        return leaf;
    }
    if let Some(max_depth) = config.max_depth {
        if depth >= max_depth {
            return leaf;
        }
    }
    let sse: f64 = indices.iter().map(|&i| w[i] * (y[i] - mean).powi(2)).sum();
    if sse <= f64::EPSILON * w_total * (mean * mean).max(1.0) {
        return leaf; // pure up to rounding
    }

    let d = x.cols();
    let features: Vec<usize> = if k_features == d {
        (0..d).collect()
    } else {
        sample_features(rng.as_deref_mut().expect("checked at entry"), d, k_features)
    };

    let split = best_split(x, y, w, indices, &features, w_total, sse, config.min_samples_leaf);
    let (feature, threshold) = match split {
        Some(s) => s,
        None => return leaf,
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x.get(i, feature) <= threshold);

    Node::Split {
        feature,
        threshold,
        left: Box::new(build_node(x, y, w, &left_idx, depth + 1, config, k_features, rng)),
        right: Box::new(build_node(x, y, w, &right_idx, depth + 1, config, k_features, rng)),
    }
}

/// Uniform sample of `k` distinct feature indices, returned ascending so
/// the in-subset tie-break stays "lowest feature index".
fn sample_features(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// Maximizes the SSE-reduction proxy Σl²/Wl + Σr²/Wr over all candidate
/// thresholds. A challenger must beat the incumbent by more than the tie
/// tolerance, which realizes the lowest-feature-then-lowest-threshold
/// tie-break.
#[allow(clippy::too_many_arguments)]
fn best_split(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    indices: &[usize],
    features: &[usize],
    w_total: f64,
    node_sse: f64,
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let s_total: f64 = indices.iter().map(|&i| w[i] * y[i]).sum();
    let base_proxy = s_total * s_total / w_total;
    let floor = GAIN_FLOOR * node_sse;
    let tie = TIE_TOLERANCE * node_sse;
    let mut best: Option<(usize, f64)> = None;
    let mut best_gain = f64::NEG_INFINITY;

    let m = indices.len();
    let mut order: Vec<usize> = indices.to_vec();
    for &feature in features {
        order.sort_by(|&a, &b| {
            x.get(a, feature)
                .partial_cmp(&x.get(b, feature))
                .expect("feature values must not be NaN")
        });
        let mut w_left = 0.0;
        let mut s_left = 0.0;
        for k in 0..m - 1 {
            let i = order[k];
            w_left += w[i];
            s_left += w[i] * y[i];
            let here = x.get(i, feature);
            let next = x.get(order[k + 1], feature);
            if here == next {
                continue; // no boundary inside a run of equal values
            }
            if k + 1 < min_leaf || m - k - 1 < min_leaf {
                continue;
            }
            let w_right = w_total - w_left;
            if w_left <= 0.0 || w_right <= 0.0 {
                continue; // zero-weight side carries no information
            }
            let s_right = s_total - s_left;
            let gain =
                s_left * s_left / w_left + s_right * s_right / w_right - base_proxy;
            let clearly_better = match best {
                None => gain > floor,
                Some(_) => gain > best_gain + tie,
            };
            if clearly_better {
                best_gain = gain;
                best = Some((feature, 0.5 * (here + next)));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_estimators: 100,
            tree: TreeConfig::default(),
            seed: 0,
        }
    }
}

/// Averaged ensemble of CART trees (bagging or random forest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut sum = vec![0.0; x.rows()];
        for tree in &self.trees {
            for (acc, p) in sum.iter_mut().zip(tree.predict(x)) {
                *acc += p;
            }
        }
        let scale = 1.0 / self.trees.len() as f64;
        sum.iter().map(|v| v * scale).collect()
    }
}

/// Bootstrap aggregation: tree t draws n rows with replacement from its
/// own stream `seed ^ t`, then grows on every feature.
pub fn fit_bagging(x: &Matrix, y: &[f64], config: &ForestConfig) -> Result<Forest, TreeError> {
    fit_forest(x, y, config, x.cols())
}

/// Random forest: bagging plus per-node uniform feature subsets. The
/// subset size defaults to ⌈d/3⌉; at `max_features == d` the sampler is
/// bypassed entirely, making the fit identical to bagging on the same
/// seed.
pub fn fit_random_forest(
    x: &Matrix,
    y: &[f64],
    config: &ForestConfig,
) -> Result<Forest, TreeError> {
    let d = x.cols();
    let k = config
        .tree
        .max_features
        .unwrap_or_else(|| d.div_ceil(3))
        .min(d.max(1));
    fit_forest(x, y, config, k)
}

fn fit_forest(
    x: &Matrix,
    y: &[f64],
    config: &ForestConfig,
    max_features: usize,
) -> Result<Forest, TreeError> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(TreeError::EmptyInput);
    }
    if n != y.len() {
        return Err(TreeError::DimensionMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    let tree_config = TreeConfig {
        max_features: if max_features == x.cols() {
            None
        } else {
            Some(max_features)
        },
        ..config.tree
    };

    let mut trees = Vec::with_capacity(config.n_estimators);
    for t in 0..config.n_estimators as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ t);
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let xs = x.select_rows(&sample);
        let ys: Vec<f64> = sample.iter().map(|&i| y[i]).collect();
        trees.push(fit_tree(&xs, &ys, None, &tree_config, Some(&mut rng))?);
    }
    Ok(Forest { trees })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub tree: TreeConfig,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig {
            n_estimators: 100,
            learning_rate: 1.0,
            tree: TreeConfig {
                max_depth: Some(3),
                ..TreeConfig::default()
            },
        }
    }
}

/// AdaBoost.R2 ensemble. Stage t contributes its prediction with weight
/// ln(1/βt) to a weighted median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub trees: Vec<RegressionTree>,
    /// ln(1/βt) per kept stage; always positive.
    pub stage_log_weights: Vec<f64>,
}

impl AdaBoost {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let per_tree: Vec<Vec<f64>> = self.trees.iter().map(|t| t.predict(x)).collect();
        (0..x.rows())
            .map(|i| {
                let values: Vec<f64> = per_tree.iter().map(|p| p[i]).collect();
                weighted_median(&values, &self.stage_log_weights)
            })
            .collect()
    }
}

/// Smallest value whose cumulative weight reaches half the total.
/// Invariant under reordering of the (value, weight) pairs.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(values.len(), weights.len());
    assert!(!values.is_empty());
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("median of NaN"));
    let total: f64 = weights.iter().sum();
    let mut cum = 0.0;
    for &i in &idx {
        cum += weights[i];
        if cum >= 0.5 * total {
            return values[i];
        }
    }
    values[idx[values.len() - 1]]
}

/// AdaBoost.R2 with the linear loss (Drucker's variant):
///   Lᵢ = |ŷᵢ − yᵢ| / max|ŷ − y|,   L̄ = Σ pᵢLᵢ,
///   β = L̄/(1−L̄),   wᵢ ← wᵢ·β^(lr·(1−Lᵢ)).
/// Rounds with L̄ ≥ 1/2 are rejected and stop the run; a perfect round
/// (max error 0) is kept with β clamped at 1e-10 and also stops it.
pub fn fit_adaboost(
    x: &Matrix,
    y: &[f64],
    config: &AdaBoostConfig,
) -> Result<AdaBoost, TreeError> {
    let n = x.rows();
    if n == 0 || x.cols() == 0 {
        return Err(TreeError::EmptyInput);
    }
    if n != y.len() {
        return Err(TreeError::DimensionMismatch {
            rows: n,
            targets: y.len(),
        });
    }

    let mut weights = vec![1.0 / n as f64; n];
    let mut model = AdaBoost {
        trees: Vec::new(),
        stage_log_weights: Vec::new(),
    };

    for _ in 0..config.n_estimators {
        let w_sum: f64 = weights.iter().sum();
        let p: Vec<f64> = weights.iter().map(|w| w / w_sum).collect();

        let tree = fit_tree(x, y, Some(&p), &config.tree, None)?;
        let pred = tree.predict(x);
        let abs_err: Vec<f64> = pred.iter().zip(y).map(|(p, t)| (p - t).abs()).collect();
        let max_err = abs_err.iter().fold(0.0f64, |a, &b| a.max(b));

        if max_err == 0.0 {
            // the stage is exact; further rounds would divide by zero
            model.trees.push(tree);
            model.stage_log_weights.push((1.0f64 / 1e-10).ln());
            break;
        }

        let loss: Vec<f64> = abs_err.iter().map(|e| e / max_err).collect();
        let avg_loss: f64 = p.iter().zip(&loss).map(|(pi, li)| pi * li).sum();
        if avg_loss >= 0.5 {
            if model.trees.is_empty() {
                return Err(TreeError::AllRoundsRejected);
            }
            break;
        }

        let beta = (avg_loss / (1.0 - avg_loss)).max(1e-10);
        for (w, li) in weights.iter_mut().zip(&loss) {
            *w *= beta.powf(config.learning_rate * (1.0 - li));
        }
        model.trees.push(tree);
        model.stage_log_weights.push((1.0 / beta).ln());
    }
    Ok(model)
}
