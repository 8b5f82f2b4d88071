//! Small feed-forward / convolutional / recurrent networks with exact
//! reverse-mode gradients, trained by minibatch SGD or Adam.
//!
//! A sample is a steps×channels [`Matrix`]; tabular inputs are 1×d, a
//! one-channel sequence is T×1, and an LSTM lookback window is W×d.
//! Layers own their parameters as one flat `Vec<f64>` with a documented
//! layout, which keeps the optimizer, the serializer, and the
//! finite-difference checker trivially in sync.
//!
//! The gradient checker compares backprop against central differences
//! and knows that ReLU and max-pooling are only piecewise smooth: any
//! parameter whose ±h probes land on different activation patterns is
//! excluded and reported rather than failed.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

#[derive(Debug)]
pub enum NeuralError {
    EmptyInput,
    ShapeMismatch(String),
    /// Training aborted because a batch loss or epoch MSE stopped being
    /// finite.
    DivergedLoss { epoch: usize },
}

impl fmt::Display for NeuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NeuralError::EmptyInput => write!(f, "cannot train on zero samples"),
            NeuralError::ShapeMismatch(msg) => write!(f, "shape mismatch: {}", msg),
            NeuralError::DivergedLoss { epoch } => {
                write!(f, "loss diverged to a non-finite value in epoch {}", epoch)
            }
        }
    }
}

impl std::error::Error for NeuralError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at the pre-activation; ReLU uses the 0 subgradient at
    /// the kink.
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Architecture description without parameters; what the JSON manifest
/// stores next to the binary tensor table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "layer")]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        activation: Activation,
    },
    MaxPool1d {
        width: usize,
    },
    Flatten,
    Lstm {
        input_dim: usize,
        hidden: usize,
    },
}

/// One layer with its flat parameter vector.
///
/// Layouts:
/// - Dense: W (out×in, row-major) then b (out).
/// - Conv1d ("valid", stride 1): W indexed \[oc]\[ic]\[dt] then b (oc).
/// - Lstm: per-gate blocks in the order f, i, o, c; within a gate
///   W (hidden×input), U (hidden×hidden), b (hidden).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<f64>,
}

impl Layer {
    pub fn new(spec: LayerSpec) -> Layer {
        let n = spec_param_count(&spec);
        Layer {
            spec,
            params: vec![0.0; n],
        }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Output shape for a given input shape, or a description of why the
    /// shapes are incompatible.
    pub fn output_shape(&self, input: (usize, usize)) -> Result<(usize, usize), String> {
        let (steps, channels) = input;
        match &self.spec {
            LayerSpec::Dense { in_dim, out_dim, .. } => {
                if steps != 1 {
                    Err(format!("dense layer needs a 1×d input, got {} steps", steps))
                } else if channels != *in_dim {
                    Err(format!("dense layer expects {} inputs, got {}", in_dim, channels))
                } else {
                    Ok((1, *out_dim))
                }
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                if channels != *in_channels {
                    Err(format!(
                        "conv expects {} channels, got {}",
                        in_channels, channels
                    ))
                } else if steps < *kernel {
                    Err(format!(
                        "conv kernel {} longer than input length {}",
                        kernel, steps
                    ))
                } else {
                    Ok((steps - kernel + 1, *out_channels))
                }
            }
            LayerSpec::MaxPool1d { width } => {
                if steps < *width {
                    Err(format!("pool width {} longer than input length {}", width, steps))
                } else {
                    Ok((steps / width, channels))
                }
            }
            LayerSpec::Flatten => Ok((1, steps * channels)),
            LayerSpec::Lstm { input_dim, hidden } => {
                if channels != *input_dim {
                    Err(format!("lstm expects {} inputs, got {}", input_dim, channels))
                } else if steps == 0 {
                    Err("lstm needs at least one step".to_string())
                } else {
                    Ok((1, *hidden))
                }
            }
        }
    }
}

pub fn spec_param_count(spec: &LayerSpec) -> usize {
    match spec {
        LayerSpec::Dense { in_dim, out_dim, .. } => out_dim * in_dim + out_dim,
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => out_channels * in_channels * kernel + out_channels,
        LayerSpec::MaxPool1d { .. } | LayerSpec::Flatten => 0,
        LayerSpec::Lstm { input_dim, hidden } => {
            4 * (hidden * input_dim + hidden * hidden + hidden)
        }
    }
}

/// Per-gate slice offsets into an LSTM parameter vector.
struct LstmLayout {
    d: usize,
    h: usize,
}

impl LstmLayout {
    fn stride(&self) -> usize {
        self.h * self.d + self.h * self.h + self.h
    }
    fn w(&self, gate: usize) -> usize {
        gate * self.stride()
    }
    fn u(&self, gate: usize) -> usize {
        gate * self.stride() + self.h * self.d
    }
    fn b(&self, gate: usize) -> usize {
        gate * self.stride() + self.h * self.d + self.h * self.h
    }
}

const GATE_F: usize = 0;
const GATE_I: usize = 1;
const GATE_O: usize = 2;
const GATE_C: usize = 3;

/// Per-step quantities the backward pass needs.
#[derive(Debug, Clone)]
struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense { input: Vec<f64>, z: Vec<f64> },
    Conv1d { input: Matrix, z: Matrix },
    MaxPool { in_shape: (usize, usize), argmax: Vec<usize> },
    Flatten { in_shape: (usize, usize) },
    Lstm { steps: Vec<LstmStep> },
}

/// z_gate = W x + U h_prev + b for one gate.
fn gate_preactivation(
    params: &[f64],
    layout: &LstmLayout,
    gate: usize,
    x: &[f64],
    h_prev: &[f64],
) -> Vec<f64> {
    let (d, h) = (layout.d, layout.h);
    let w = &params[layout.w(gate)..layout.w(gate) + h * d];
    let u = &params[layout.u(gate)..layout.u(gate) + h * h];
    let b = &params[layout.b(gate)..layout.b(gate) + h];
    (0..h)
        .map(|r| {
            let wx: f64 = (0..d).map(|c| w[r * d + c] * x[c]).sum();
            let uh: f64 = (0..h).map(|c| u[r * h + c] * h_prev[c]).sum();
            wx + uh + b[r]
        })
        .collect()
}

/// Index range of the forget-gate bias inside an LSTM layer's parameter
/// vector. Pinning these entries high saturates the forget gate — the
/// standard hook for checking that the cell state carries unchanged.
pub fn lstm_forget_bias_range(input_dim: usize, hidden: usize) -> std::ops::Range<usize> {
    let layout = LstmLayout {
        d: input_dim,
        h: hidden,
    };
    layout.b(GATE_F)..layout.b(GATE_F) + hidden
}

/// Runs the LSTM recurrence over `xs` (T×input_dim) and returns the
/// hidden and cell trajectories as (T+1)×hidden matrices whose row 0 is
/// the initial state (zeros unless supplied).
pub fn lstm_unroll(
    layer: &Layer,
    xs: &Matrix,
    initial: Option<(&[f64], &[f64])>,
) -> Result<(Matrix, Matrix), NeuralError> {
    let LayerSpec::Lstm { input_dim, hidden } = layer.spec else {
        return Err(NeuralError::ShapeMismatch("not an LSTM layer".into()));
    };
    if xs.cols() != input_dim {
        return Err(NeuralError::ShapeMismatch(format!(
            "lstm expects {} inputs, got {}",
            input_dim,
            xs.cols()
        )));
    }
    let layout = LstmLayout {
        d: input_dim,
        h: hidden,
    };
    let t_steps = xs.rows();
    let mut hs = Matrix::zeros(t_steps + 1, hidden);
    let mut cs = Matrix::zeros(t_steps + 1, hidden);
    if let Some((h0, c0)) = initial {
        for j in 0..hidden {
            hs.set(0, j, h0[j]);
            cs.set(0, j, c0[j]);
        }
    }
    for t in 0..t_steps {
        let x = xs.row(t).to_vec();
        let h_prev = hs.row(t).to_vec();
        let c_prev = cs.row(t).to_vec();
        let zf = gate_preactivation(&layer.params, &layout, GATE_F, &x, &h_prev);
        let zi = gate_preactivation(&layer.params, &layout, GATE_I, &x, &h_prev);
        let zo = gate_preactivation(&layer.params, &layout, GATE_O, &x, &h_prev);
        let zc = gate_preactivation(&layer.params, &layout, GATE_C, &x, &h_prev);
        for j in 0..hidden {
            let f = sigmoid(zf[j]);
            let i = sigmoid(zi[j]);
            let o = sigmoid(zo[j]);
            let g = zc[j].tanh();
            let c = f * c_prev[j] + i * g;
            cs.set(t + 1, j, c);
            hs.set(t + 1, j, o * c.tanh());
        }
    }
    Ok((hs, cs))
}

impl Layer {
    fn forward(&self, input: &Matrix) -> (Matrix, LayerCache) {
        match &self.spec {
            LayerSpec::Dense {
                in_dim,
                out_dim,
                activation,
            } => {
                debug_assert_eq!(input.rows(), 1);
                debug_assert_eq!(input.cols(), *in_dim);
                let x = input.row(0);
                let w = &self.params[..out_dim * in_dim];
                let b = &self.params[out_dim * in_dim..];
                let z: Vec<f64> = (0..*out_dim)
                    .map(|o| {
                        b[o] + (0..*in_dim).map(|i| w[o * in_dim + i] * x[i]).sum::<f64>()
                    })
                    .collect();
                let out = Matrix::from_fn(1, *out_dim, |_, o| activation.apply(z[o]));
                (
                    out,
                    LayerCache::Dense {
                        input: x.to_vec(),
                        z,
                    },
                )
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
                activation,
            } => {
                let t_out = input.rows() - kernel + 1;
                let w = &self.params[..out_channels * in_channels * kernel];
                let b = &self.params[out_channels * in_channels * kernel..];
                let z = Matrix::from_fn(t_out, *out_channels, |t, oc| {
                    let mut acc = b[oc];
                    for ic in 0..*in_channels {
                        for dt in 0..*kernel {
                            acc += w[oc * in_channels * kernel + ic * kernel + dt]
                                * input.get(t + dt, ic);
                        }
                    }
                    acc
                });
                let out = Matrix::from_fn(t_out, *out_channels, |t, oc| {
                    activation.apply(z.get(t, oc))
                });
                (
                    out,
                    LayerCache::Conv1d {
                        input: input.clone(),
                        z,
                    },
                )
            }
            LayerSpec::MaxPool1d { width } => {
                let t_out = input.rows() / width;
                let channels = input.cols();
                let mut argmax = vec![0usize; t_out * channels];
                let out = Matrix::from_fn(t_out, channels, |t, c| {
                    let mut best_row = t * width;
                    let mut best = input.get(best_row, c);
                    for r in t * width + 1..(t + 1) * width {
                        if input.get(r, c) > best {
                            best = input.get(r, c);
                            best_row = r;
                        }
                    }
                    argmax[t * channels + c] = best_row;
                    best
                });
                (
                    out,
                    LayerCache::MaxPool {
                        in_shape: (input.rows(), input.cols()),
                        argmax,
                    },
                )
            }
            LayerSpec::Flatten => {
                let out = Matrix::from_fn(1, input.rows() * input.cols(), |_, k| {
                    input.get(k / input.cols(), k % input.cols())
                });
                (
                    out,
                    LayerCache::Flatten {
                        in_shape: (input.rows(), input.cols()),
                    },
                )
            }
            LayerSpec::Lstm { input_dim, hidden } => {
                let layout = LstmLayout {
                    d: *input_dim,
                    h: *hidden,
                };
                let mut h_prev = vec![0.0; *hidden];
                let mut c_prev = vec![0.0; *hidden];
                let mut steps = Vec::with_capacity(input.rows());
                for t in 0..input.rows() {
                    let x = input.row(t).to_vec();
                    let zf = gate_preactivation(&self.params, &layout, GATE_F, &x, &h_prev);
                    let zi = gate_preactivation(&self.params, &layout, GATE_I, &x, &h_prev);
                    let zo = gate_preactivation(&self.params, &layout, GATE_O, &x, &h_prev);
                    let zc = gate_preactivation(&self.params, &layout, GATE_C, &x, &h_prev);
                    let f: Vec<f64> = zf.iter().map(|&z| sigmoid(z)).collect();
                    let i: Vec<f64> = zi.iter().map(|&z| sigmoid(z)).collect();
                    let o: Vec<f64> = zo.iter().map(|&z| sigmoid(z)).collect();
                    let g: Vec<f64> = zc.iter().map(|&z| z.tanh()).collect();
                    let c: Vec<f64> = (0..*hidden)
                        .map(|j| f[j] * c_prev[j] + i[j] * g[j])
                        .collect();
                    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
                    let h: Vec<f64> = (0..*hidden).map(|j| o[j] * tanh_c[j]).collect();
                    steps.push(LstmStep {
                        x,
                        h_prev: h_prev.clone(),
                        c_prev: c_prev.clone(),
                        f,
                        i,
                        o,
                        g,
                        tanh_c,
                    });
                    h_prev = h;
                    c_prev = c;
                }
                let out = Matrix::from_fn(1, *hidden, |_, j| h_prev[j]);
                (out, LayerCache::Lstm { steps })
            }
        }
    }

    /// Forward pass that only records the activation pattern (ReLU signs
    /// and pool argmax rows) for the finite-difference kink guard.
    fn forward_with_pattern(&self, input: &Matrix, pattern: &mut Vec<u64>) -> Matrix {
        match &self.spec {
            LayerSpec::Dense { activation, .. } => {
                let (out, cache) = self.forward(input);
                if *activation == Activation::Relu {
                    if let LayerCache::Dense { z, .. } = cache {
                        pattern.extend(z.iter().map(|v| (*v > 0.0) as u64));
                    }
                }
                out
            }
            LayerSpec::Conv1d { activation, .. } => {
                let (out, cache) = self.forward(input);
                if *activation == Activation::Relu {
                    if let LayerCache::Conv1d { z, .. } = cache {
                        pattern.extend(z.data().iter().map(|v| (*v > 0.0) as u64));
                    }
                }
                out
            }
            LayerSpec::MaxPool1d { .. } => {
                let (out, cache) = self.forward(input);
                if let LayerCache::MaxPool { argmax, .. } = cache {
                    pattern.extend(argmax.iter().map(|&r| r as u64));
                }
                out
            }
            _ => self.forward(input).0,
        }
    }

    /// Backpropagates `dout`, accumulating parameter gradients into
    /// `grad` (same layout as `params`) and returning the input
    /// gradient.
    fn backward(&self, dout: &Matrix, cache: &LayerCache, grad: &mut [f64]) -> Matrix {
        match (&self.spec, cache) {
            (
                LayerSpec::Dense {
                    in_dim,
                    out_dim,
                    activation,
                },
                LayerCache::Dense { input, z },
            ) => {
                let w = &self.params[..out_dim * in_dim];
                let (gw, gb) = grad.split_at_mut(out_dim * in_dim);
                let mut dx = vec![0.0; *in_dim];
                for o in 0..*out_dim {
                    let dz = dout.get(0, o) * activation.derivative(z[o]);
                    gb[o] += dz;
                    for i in 0..*in_dim {
                        gw[o * in_dim + i] += dz * input[i];
                        dx[i] += w[o * in_dim + i] * dz;
                    }
                }
                Matrix::from_rows(&[dx])
            }
            (
                LayerSpec::Conv1d {
                    in_channels,
                    out_channels,
                    kernel,
                    activation,
                },
                LayerCache::Conv1d { input, z },
            ) => {
                let w_len = out_channels * in_channels * kernel;
                let w = &self.params[..w_len];
                let (gw, gb) = grad.split_at_mut(w_len);
                let mut dx = Matrix::zeros(input.rows(), input.cols());
                for t in 0..z.rows() {
                    for oc in 0..*out_channels {
                        let dz = dout.get(t, oc) * activation.derivative(z.get(t, oc));
                        if dz == 0.0 {
                            continue;
                        }
                        gb[oc] += dz;
                        for ic in 0..*in_channels {
                            for dt in 0..*kernel {
                                let wi = oc * in_channels * kernel + ic * kernel + dt;
                                gw[wi] += dz * input.get(t + dt, ic);
                                let v = dx.get(t + dt, ic) + w[wi] * dz;
                                dx.set(t + dt, ic, v);
                            }
                        }
                    }
                }
                dx
            }
            (LayerSpec::MaxPool1d { .. }, LayerCache::MaxPool { in_shape, argmax }) => {
                let mut dx = Matrix::zeros(in_shape.0, in_shape.1);
                for t in 0..dout.rows() {
                    for c in 0..dout.cols() {
                        let row = argmax[t * in_shape.1 + c];
                        let v = dx.get(row, c) + dout.get(t, c);
                        dx.set(row, c, v);
                    }
                }
                dx
            }
            (LayerSpec::Flatten, LayerCache::Flatten { in_shape }) => {
                Matrix::from_fn(in_shape.0, in_shape.1, |r, c| dout.get(0, r * in_shape.1 + c))
            }
            (LayerSpec::Lstm { input_dim, hidden }, LayerCache::Lstm { steps }) => {
                let layout = LstmLayout {
                    d: *input_dim,
                    h: *hidden,
                };
                let (d, h) = (*input_dim, *hidden);
                let mut dh: Vec<f64> = (0..h).map(|j| dout.get(0, j)).collect();
                let mut dc = vec![0.0; h];
                let mut dx_all = Matrix::zeros(steps.len(), d);

                for (t, step) in steps.iter().enumerate().rev() {
                    // h = o∘tanh(c)
                    let mut dzo = vec![0.0; h];
                    for j in 0..h {
                        let do_ = dh[j] * step.tanh_c[j];
                        dzo[j] = do_ * step.o[j] * (1.0 - step.o[j]);
                        dc[j] += dh[j] * step.o[j] * (1.0 - step.tanh_c[j] * step.tanh_c[j]);
                    }
                    // c = f∘c_prev + i∘g
                    let mut dzf = vec![0.0; h];
                    let mut dzi = vec![0.0; h];
                    let mut dzc = vec![0.0; h];
                    for j in 0..h {
                        dzf[j] = dc[j] * step.c_prev[j] * step.f[j] * (1.0 - step.f[j]);
                        dzi[j] = dc[j] * step.g[j] * step.i[j] * (1.0 - step.i[j]);
                        dzc[j] = dc[j] * step.i[j] * (1.0 - step.g[j] * step.g[j]);
                    }

                    let mut dh_prev = vec![0.0; h];
                    let mut dx = vec![0.0; d];
                    for (gate, dz) in [
                        (GATE_F, &dzf),
                        (GATE_I, &dzi),
                        (GATE_O, &dzo),
                        (GATE_C, &dzc),
                    ] {
                        let wb = layout.w(gate);
                        let ub = layout.u(gate);
                        let bb = layout.b(gate);
                        for r in 0..h {
                            let dzr = dz[r];
                            if dzr == 0.0 {
                                continue;
                            }
                            grad[bb + r] += dzr;
                            for c in 0..d {
                                grad[wb + r * d + c] += dzr * step.x[c];
                                dx[c] += self.params[wb + r * d + c] * dzr;
                            }
                            for c in 0..h {
                                grad[ub + r * h + c] += dzr * step.h_prev[c];
                                dh_prev[c] += self.params[ub + r * h + c] * dzr;
                            }
                        }
                    }
                    for c in 0..d {
                        dx_all.set(t, c, dx[c]);
                    }
                    for j in 0..h {
                        dc[j] *= step.f[j]; // dc_prev
                        dh[j] = dh_prev[j];
                    }
                }
                dx_all
            }
            _ => unreachable!("cache kind always matches its layer"),
        }
    }
}

/// Weight initialization schemes. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "scheme")]
pub enum Init {
    Normal { std: f64 },
    /// N(0, √(2/fan_in)); the usual choice ahead of ReLU.
    He,
}

fn init_layer(layer: &mut Layer, init: Init, rng: &mut ChaCha8Rng) {
    let std = |fan_in: usize| match init {
        Init::Normal { std } => std,
        Init::He => (2.0 / fan_in as f64).sqrt(),
    };
    match layer.spec.clone() {
        LayerSpec::Dense { in_dim, out_dim, .. } => {
            let dist = Normal::new(0.0, std(in_dim)).expect("std is finite");
            for w in &mut layer.params[..out_dim * in_dim] {
                *w = dist.sample(rng);
            }
            for b in &mut layer.params[out_dim * in_dim..] {
                *b = 0.0;
            }
        }
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
            ..
        } => {
            let w_len = out_channels * in_channels * kernel;
            let dist = Normal::new(0.0, std(in_channels * kernel)).expect("std is finite");
            for w in &mut layer.params[..w_len] {
                *w = dist.sample(rng);
            }
            for b in &mut layer.params[w_len..] {
                *b = 0.0;
            }
        }
        LayerSpec::Lstm { input_dim, hidden } => {
            let layout = LstmLayout {
                d: input_dim,
                h: hidden,
            };
            let dist = Normal::new(0.0, std(input_dim + hidden)).expect("std is finite");
            for p in layer.params.iter_mut() {
                *p = dist.sample(rng);
            }
            for gate in 0..4 {
                for b in &mut layer.params[layout.b(gate)..layout.b(gate) + hidden] {
                    *b = 0.0;
                }
            }
        }
        LayerSpec::MaxPool1d { .. } | LayerSpec::Flatten => {}
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn from_specs(specs: Vec<LayerSpec>) -> Network {
        Network {
            layers: specs.into_iter().map(Layer::new).collect(),
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Re-draws every weight from one scheme (biases zero),
    /// deterministically from the seed.
    pub fn initialize(&mut self, init: Init, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            init_layer(layer, init, &mut rng);
        }
    }

    /// Walks the layer shapes for the given sample shape; the network
    /// must end in a single scalar.
    pub fn check_shapes(&self, sample_shape: (usize, usize)) -> Result<(), NeuralError> {
        let mut shape = sample_shape;
        for (idx, layer) in self.layers.iter().enumerate() {
            shape = layer
                .output_shape(shape)
                .map_err(|msg| NeuralError::ShapeMismatch(format!("layer {}: {}", idx, msg)))?;
        }
        if shape != (1, 1) {
            return Err(NeuralError::ShapeMismatch(format!(
                "network must end in a scalar, ends in {}×{}",
                shape.0, shape.1
            )));
        }
        Ok(())
    }

    pub fn predict(&self, sample: &Matrix) -> f64 {
        let mut activation = sample.clone();
        for layer in &self.layers {
            activation = layer.forward(&activation).0;
        }
        activation.get(0, 0)
    }

    pub fn predict_batch(&self, samples: &[Matrix]) -> Vec<f64> {
        samples.iter().map(|s| self.predict(s)).collect()
    }

    fn forward_cached(&self, sample: &Matrix) -> (f64, Vec<LayerCache>) {
        let mut activation = sample.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (out, cache) = layer.forward(&activation);
            caches.push(cache);
            activation = out;
        }
        (activation.get(0, 0), caches)
    }

    fn forward_pattern(&self, sample: &Matrix) -> (f64, Vec<u64>) {
        let mut pattern = Vec::new();
        let mut activation = sample.clone();
        for layer in &self.layers {
            activation = layer.forward_with_pattern(&activation, &mut pattern);
        }
        (activation.get(0, 0), pattern)
    }

    /// Accumulates dLoss/dParams into `grads` given dLoss/dOutput.
    fn backward(&self, caches: &[LayerCache], dpred: f64, grads: &mut [Vec<f64>]) {
        let mut dout = Matrix::from_rows(&[vec![dpred]]);
        for idx in (0..self.layers.len()).rev() {
            dout = self.layers[idx].backward(&dout, &caches[idx], &mut grads[idx]);
        }
    }

    fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| vec![0.0; l.n_params()]).collect()
    }
}

/// Multilayer perceptron: `depth` ReLU layers of `width` units on a 1×d
/// input, then a linear unit. Hidden layers draw He weights; the head
/// draws N(0, 0.05).
pub fn build_mlp(input_dim: usize, depth: usize, width: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut in_dim = input_dim;
    for _ in 0..depth {
        let mut layer = Layer::new(LayerSpec::Dense {
            in_dim,
            out_dim: width,
            activation: Activation::Relu,
        });
        init_layer(&mut layer, Init::He, &mut rng);
        layers.push(layer);
        in_dim = width;
    }
    let mut head = Layer::new(LayerSpec::Dense {
        in_dim,
        out_dim: 1,
        activation: Activation::Linear,
    });
    init_layer(&mut head, Init::Normal { std: 0.05 }, &mut rng);
    layers.push(head);
    Network { layers }
}

/// One-dimensional CNN on a length-`input_len`, single-channel sequence:
/// Conv1d(filters, kernel, ReLU) → MaxPool(pool) → Flatten →
/// Dense(dense, ReLU) → Dense(1).
pub fn build_cnn(
    input_len: usize,
    filters: usize,
    kernel: usize,
    pool: usize,
    dense: usize,
    seed: u64,
) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let conv_out = input_len - kernel + 1;
    let flat = (conv_out / pool) * filters;
    let mut layers = vec![
        Layer::new(LayerSpec::Conv1d {
            in_channels: 1,
            out_channels: filters,
            kernel,
            activation: Activation::Relu,
        }),
        Layer::new(LayerSpec::MaxPool1d { width: pool }),
        Layer::new(LayerSpec::Flatten),
        Layer::new(LayerSpec::Dense {
            in_dim: flat,
            out_dim: dense,
            activation: Activation::Relu,
        }),
        Layer::new(LayerSpec::Dense {
            in_dim: dense,
            out_dim: 1,
            activation: Activation::Linear,
        }),
    ];
    init_layer(&mut layers[0], Init::He, &mut rng);
    init_layer(&mut layers[3], Init::He, &mut rng);
    init_layer(&mut layers[4], Init::Normal { std: 0.05 }, &mut rng);
    Network { layers }
}

/// LSTM over a W×d lookback window, linear head on the final hidden
/// state.
pub fn build_lstm(input_dim: usize, hidden: usize, seed: u64) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lstm = Layer::new(LayerSpec::Lstm { input_dim, hidden });
    init_layer(&mut lstm, Init::Normal { std: 0.05 }, &mut rng);
    let mut head = Layer::new(LayerSpec::Dense {
        in_dim: hidden,
        out_dim: 1,
        activation: Activation::Linear,
    });
    init_layer(&mut head, Init::Normal { std: 0.05 }, &mut rng);
    Network {
        layers: vec![lstm, head],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    /// Seeds the per-epoch shuffling only; weights are seeded at build
    /// time.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 32,
            optimizer: Optimizer::default(),
            shuffle_seed: 0,
        }
    }
}

/// One row of the training curve: `loss` is the mean of the minibatch
/// losses seen during the epoch (moving parameters), `mse` is a full
/// pass at the epoch's end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub loss: f64,
    pub mse: f64,
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

/// Minibatch training with squared-error loss. Samples are visited in a
/// seeded shuffled order each epoch; the last short batch is kept.
/// Returns the per-epoch trace, or [`NeuralError::DivergedLoss`] as soon
/// as a non-finite loss shows up.
pub fn train(
    net: &mut Network,
    samples: &[Matrix],
    targets: &[f64],
    config: &TrainConfig,
) -> Result<Vec<EpochTrace>, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    if samples.len() != targets.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "{} samples but {} targets",
            samples.len(),
            targets.len()
        )));
    }
    net.check_shapes((samples[0].rows(), samples[0].cols()))?;
    for (i, s) in samples.iter().enumerate() {
        if (s.rows(), s.cols()) != (samples[0].rows(), samples[0].cols()) {
            return Err(NeuralError::ShapeMismatch(format!(
                "sample {} has shape {}×{}, expected {}×{}",
                i,
                s.rows(),
                s.cols(),
                samples[0].rows(),
                samples[0].cols()
            )));
        }
    }

    let n = samples.len();
    let batch = config.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = AdamState {
        m: net.zero_grads(),
        v: net.zero_grads(),
        t: 0,
    };
    let mut traces = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        for i in (1..n).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            order.swap(i, j);
        }

        let mut batch_losses = Vec::new();
        for chunk in order.chunks(batch) {
            let mut grads = net.zero_grads();
            let mut loss = 0.0;
            for &idx in chunk {
                let (pred, caches) = net.forward_cached(&samples[idx]);
                let err = pred - targets[idx];
                loss += err * err;
                net.backward(&caches, 2.0 * err, &mut grads);
            }
            let scale = 1.0 / chunk.len() as f64;
            loss *= scale;
            if !loss.is_finite() {
                return Err(NeuralError::DivergedLoss { epoch });
            }
            batch_losses.push(loss);
            for g in grads.iter_mut().flat_map(|v| v.iter_mut()) {
                *g *= scale;
            }
            apply_step(net, &grads, &config.optimizer, &mut adam);
        }

        let epoch_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        let mse = {
            let mut acc = 0.0;
            for (s, t) in samples.iter().zip(targets) {
                let err = net.predict(s) - t;
                acc += err * err;
            }
            acc / n as f64
        };
        if !mse.is_finite() {
            return Err(NeuralError::DivergedLoss { epoch });
        }
        traces.push(EpochTrace {
            epoch,
            loss: epoch_loss,
            mse,
        });
    }
    Ok(traces)
}

fn apply_step(net: &mut Network, grads: &[Vec<f64>], optimizer: &Optimizer, state: &mut AdamState) {
    match *optimizer {
        Optimizer::Sgd { lr } => {
            for (layer, g) in net.layers.iter_mut().zip(grads) {
                for (p, gi) in layer.params.iter_mut().zip(g) {
                    *p -= lr * gi;
                }
            }
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            state.t += 1;
            let bc1 = 1.0 - beta1.powi(state.t as i32);
            let bc2 = 1.0 - beta2.powi(state.t as i32);
            for (li, (layer, g)) in net.layers.iter_mut().zip(grads).enumerate() {
                let m = &mut state.m[li];
                let v = &mut state.v[li];
                for (pi, (p, gi)) in layer.params.iter_mut().zip(g).enumerate() {
                    m[pi] = beta1 * m[pi] + (1.0 - beta1) * gi;
                    v[pi] = beta2 * v[pi] + (1.0 - beta2) * gi * gi;
                    let m_hat = m[pi] / bc1;
                    let v_hat = v[pi] / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

/// Outcome of comparing backprop with central finite differences on one
/// sample.
#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    pub max_rel_error: f64,
    /// (layer, parameter) pairs skipped because the ±h probes crossed a
    /// ReLU kink or changed a pool argmax.
    pub excluded: Vec<(usize, usize)>,
    pub checked: usize,
}

/// Checks every parameter of the network against (L(θ+h) − L(θ−h))/2h
/// on the squared-error loss of a single sample. Relative error uses
/// |ga − gf| / max(|ga|, |gf|, 1e-8).
pub fn gradient_check(
    net: &mut Network,
    sample: &Matrix,
    target: f64,
    step: f64,
) -> Result<GradientCheckReport, NeuralError> {
    net.check_shapes((sample.rows(), sample.cols()))?;

    let (pred, caches) = net.forward_cached(sample);
    let mut analytic = net.zero_grads();
    net.backward(&caches, 2.0 * (pred - target), &mut analytic);

    let mut report = GradientCheckReport {
        max_rel_error: 0.0,
        excluded: Vec::new(),
        checked: 0,
    };

    for li in 0..net.layers.len() {
        for pi in 0..net.layers[li].n_params() {
            let original = net.layers[li].params[pi];

            net.layers[li].params[pi] = original + step;
            let (pred_plus, pattern_plus) = net.forward_pattern(sample);
            net.layers[li].params[pi] = original - step;
            let (pred_minus, pattern_minus) = net.forward_pattern(sample);
            net.layers[li].params[pi] = original;

            if pattern_plus != pattern_minus {
                report.excluded.push((li, pi));
                continue;
            }
            let loss_plus = (pred_plus - target).powi(2);
            let loss_minus = (pred_minus - target).powi(2);
            let fd = (loss_plus - loss_minus) / (2.0 * step);
            let ga = analytic[li][pi];
            let rel = (ga - fd).abs() / ga.abs().max(fd.abs()).max(1e-8);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}
