//! A small ReLU multilayer perceptron `x -> Δ^{C-1}` trained with mini-batch
//! SGD (momentum, weight decay) on cross-entropy against the noisy labels.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agreement::ProbMatrix;
use crate::data::LabeledDataset;
use crate::numerics::{dot, softmax_in_place, RandomStream};
use crate::parallel;
use crate::{Error, Result};

/// Probabilities are floored here before taking the log.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Dense layer, `weights` is `outputs × inputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Weights and biases of one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros(d: usize, hidden_sizes: &[usize], class_count: usize) -> Self {
        let mut widths = Vec::with_capacity(hidden_sizes.len() + 2);
        widths.push(d);
        widths.extend_from_slice(hidden_sizes);
        widths.push(class_count);
        Self {
            layers: widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs, pair[1].inputs
                )));
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape("layer buffer sizes do not match widths".into()));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("non-finite parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 50,
            weight_decay: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument("weight_decay must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer of width 0".into()));
        }
        Ok(())
    }
}

/// He-normal initialisation (`N(0, 2 / fan_in)`), zero biases.
pub fn init_mlp(
    d: usize,
    hidden_sizes: &[usize],
    class_count: usize,
    stream: &mut RandomStream,
) -> MlpParams {
    let mut params = MlpParams::zeros(d, hidden_sizes, class_count);
    for layer in &mut params.layers {
        let std = (2.0 / layer.inputs as f64).sqrt();
        for w in &mut layer.weights {
            *w = std * stream.normal();
        }
    }
    params
}

/// Per-layer activation buffers reused across samples.
struct Scratch {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(params: &MlpParams) -> Self {
        let acts = params.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        let deltas = params.layers.iter().map(|l| vec![0.0; l.outputs]).collect();
        Self { acts, deltas }
    }
}

/// Forward pass into `scratch`; the last activation holds the probabilities.
fn forward_into(params: &MlpParams, x: &[f64], scratch: &mut Scratch) {
    let last = params.layers.len() - 1;
    for (l, layer) in params.layers.iter().enumerate() {
        let (done, rest) = scratch.acts.split_at_mut(l);
        let input: &[f64] = if l == 0 { x } else { &done[l - 1] };
        let out = &mut rest[0];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
            let z = layer.bias[j] + dot(row, input);
            *o = if l < last { z.max(0.0) } else { z };
        }
        if l == last {
            softmax_in_place(out);
        }
    }
}

/// Class-probability vector for one input.
pub fn forward(params: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} features, network expects {}",
            x.len(),
            params.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let mut scratch = Scratch::new(params);
    forward_into(params, x, &mut scratch);
    let probs = scratch.acts.pop().unwrap_or_default();
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    Ok(probs)
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(LOSS_FLOOR).ln()
}

/// Accumulates `scale · ∂loss/∂θ` for one sample into `grads`; returns the loss.
fn backprop(
    params: &MlpParams,
    x: &[f64],
    label: usize,
    scale: f64,
    scratch: &mut Scratch,
    grads: &mut MlpParams,
) -> f64 {
    forward_into(params, x, scratch);
    let last = params.layers.len() - 1;
    let loss = cross_entropy(&scratch.acts[last], label);

    // softmax + cross-entropy: ∂/∂z = p - onehot
    scratch.deltas[last].copy_from_slice(&scratch.acts[last]);
    scratch.deltas[last][label] -= 1.0;

    for l in (0..=last).rev() {
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        let input: &[f64] = if l == 0 { x } else { &scratch.acts[l - 1] };
        {
            let delta = &scratch.deltas[l];
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let s = scale * dj;
                g.bias[j] += s;
                let row = &mut g.weights[j * layer.inputs..(j + 1) * layer.inputs];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += s * a;
                }
            }
        }
        if l > 0 {
            let (lower, upper) = scratch.deltas.split_at_mut(l);
            let delta = &upper[0];
            let prev = &mut lower[l - 1];
            prev.iter_mut().for_each(|v| *v = 0.0);
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                let row = &layer.weights[j * layer.inputs..(j + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += w * dj;
                }
            }
            for (p, &a) in prev.iter_mut().zip(&scratch.acts[l - 1]) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
        }
    }
    loss
}

/// Cross-entropy loss of one sample and its analytic gradient.
pub fn loss_and_gradient(params: &MlpParams, x: &[f64], label: usize) -> Result<(f64, MlpParams)> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape("input width does not match network".into()));
    }
    if label >= params.output_dim() {
        return Err(Error::InvalidArgument(format!("label {label} out of range")));
    }
    let mut scratch = Scratch::new(params);
    let mut grads = params.zeros_like();
    let loss = backprop(params, x, label, 1.0, &mut scratch, &mut grads);
    Ok((loss, grads))
}

/// Central finite differences of `cross_entropy(forward(θ, x), label)`.
pub fn numerical_gradient(params: &MlpParams, x: &[f64], label: usize, h: f64) -> Result<Vec<f64>> {
    let mut probe = params.clone();
    let count = params.parameter_count();
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let original = *probe.values_mut().nth(k).unwrap();
        *probe.values_mut().nth(k).unwrap() = original + h;
        let up = cross_entropy(&forward(&probe, x)?, label);
        *probe.values_mut().nth(k).unwrap() = original - h;
        let down = cross_entropy(&forward(&probe, x)?, label);
        *probe.values_mut().nth(k).unwrap() = original;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// `max_k |a_k - b_k| / max(|a_k|, |b_k|, 1e-6)`. The floor keeps
/// finite-difference round-off on near-zero components from dominating.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Max relative error between backprop and central differences (`h = 1e-5`).
pub fn gradient_check(params: &MlpParams, x: &[f64], label: usize) -> Result<f64> {
    let (_, analytic) = loss_and_gradient(params, x, label)?;
    let numeric = numerical_gradient(params, x, label, 1e-5)?;
    Ok(max_relative_error(&analytic.to_flat(), &numeric))
}

/// A classifier together with its SGD momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    params: MlpParams,
    velocity: MlpParams,
}

impl Classifier {
    pub fn new(params: MlpParams) -> Self {
        let velocity = params.zeros_like();
        Self { params, velocity }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    /// One epoch of mini-batch SGD over a stream-shuffled permutation of
    /// `indices`, against the noisy labels. Returns the mean per-sample loss
    /// (each loss measured before that sample's batch update).
    pub fn train_epoch(
        &mut self,
        ds: &LabeledDataset,
        indices: &[usize],
        cfg: &TrainConfig,
        stream: &mut RandomStream,
    ) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= ds.len()) {
            return Err(Error::InvalidArgument(format!("sample index {bad} out of range")));
        }
        if ds.dim() != self.params.input_dim() || ds.class_count() != self.params.output_dim() {
            return Err(Error::Shape("dataset does not match network".into()));
        }
        cfg.validate()?;

        let mut order = indices.to_vec();
        stream.shuffle(&mut order);

        let mut scratch = Scratch::new(&self.params);
        let mut grads = self.params.zeros_like();
        let mut total_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.values_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                total_loss += backprop(
                    &self.params,
                    ds.x(i),
                    ds.noisy_labels()[i],
                    scale,
                    &mut scratch,
                    &mut grads,
                );
            }
            self.step(&grads, cfg);
        }
        let mean = total_loss / order.len() as f64;
        if !mean.is_finite() || self.params.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogits);
        }
        Ok(mean)
    }

    fn step(&mut self, grads: &MlpParams, cfg: &TrainConfig) {
        let (lr, mu, wd) = (cfg.learning_rate, cfg.momentum, cfg.weight_decay);
        for ((layer, vel), g) in self
            .params
            .layers
            .iter_mut()
            .zip(&mut self.velocity.layers)
            .zip(&grads.layers)
        {
            let update = |w: &mut [f64], v: &mut [f64], g: &[f64]| {
                for ((w, v), g) in w.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = mu * *v + g + wd * *w;
                    *w -= lr * *v;
                }
            };
            update(&mut layer.weights, &mut vel.weights, &g.weights);
            update(&mut layer.bias, &mut vel.bias, &g.bias);
        }
    }
}

/// Trains a fresh classifier on `indices` for `cfg.epochs` epochs.
pub fn train_plain(
    params: MlpParams,
    ds: &LabeledDataset,
    indices: &[usize],
    cfg: &TrainConfig,
    mut stream_for_epoch: impl FnMut(usize) -> RandomStream,
) -> Result<(MlpParams, Vec<f64>)> {
    let mut clf = Classifier::new(params);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut stream = stream_for_epoch(epoch);
        losses.push(clf.train_epoch(ds, indices, cfg, &mut stream)?);
    }
    Ok((clf.into_params(), losses))
}

/// Row `r` is `forward(params, x_{indices[r]})`. Rows are computed in parallel
/// when the `parallel` feature is enabled.
pub fn predict_all(params: &MlpParams, ds: &LabeledDataset, indices: &[usize]) -> Result<ProbMatrix> {
    if ds.dim() != params.input_dim() || ds.class_count() != params.output_dim() {
        return Err(Error::Shape("dataset does not match network".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::InvalidArgument(format!("sample index {bad} out of range")));
    }
    let c = params.output_dim();
    let mut data = vec![0.0; indices.len() * c];
    parallel::fill_rows(&mut data, c, |r, row| {
        let mut scratch = Scratch::new(params);
        forward_into(params, ds.x(indices[r]), &mut scratch);
        row.copy_from_slice(&scratch.acts[scratch.acts.len() - 1]);
    });
    ProbMatrix::new(indices.len(), c, data)
}

/// Writes parameters as CSV `layer,kind,row,col,value` (`kind` is `weight` or
/// `bias`; biases use `col = 0`). Values use shortest round-trip formatting.
pub fn write_checkpoint<W: Write>(params: &MlpParams, mut out: W) -> std::io::Result<()> {
    let mut text = String::from("layer,kind,row,col,value\n");
    for (l, layer) in params.layers.iter().enumerate() {
        for j in 0..layer.outputs {
            for i in 0..layer.inputs {
                let v = layer.weights[j * layer.inputs + i];
                writeln!(text, "{l},weight,{j},{i},{v:?}").unwrap();
            }
        }
        for (j, v) in layer.bias.iter().enumerate() {
            writeln!(text, "{l},bias,{j},0,{v:?}").unwrap();
        }
    }
    out.write_all(text.as_bytes())?;
    out.flush()
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<MlpParams> {
    struct Entry {
        layer: usize,
        bias: bool,
        row: usize,
        col: usize,
        value: f64,
    }
    let mut entries = Vec::new();
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h == "layer,kind,row,col,value" => {}
        _ => return Err(Error::parse(1, "expected header `layer,kind,row,col,value`")),
    }
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::parse(lineno, "expected 5 columns"));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(lineno, format!("invalid index `{s}`")))
        };
        let bias = match f[1] {
            "weight" => false,
            "bias" => true,
            other => return Err(Error::parse(lineno, format!("unknown kind `{other}`"))),
        };
        let value: f64 = f[4]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid value `{}`", f[4])))?;
        entries.push(Entry {
            layer: num(f[0])?,
            bias,
            row: num(f[2])?,
            col: num(f[3])?,
            value,
        });
    }
    let depth = entries.iter().map(|e| e.layer + 1).max().unwrap_or(0);
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let ws = entries.iter().filter(|e| e.layer == l && !e.bias);
        let (outputs, inputs) = ws.fold((0, 0), |(o, i), e| (o.max(e.row + 1), i.max(e.col + 1)));
        let mut layer = Layer::zeros(inputs, outputs);
        let mut seen = vec![false; inputs * outputs + outputs];
        for e in entries.iter().filter(|e| e.layer == l) {
            let slot = if e.bias {
                if e.row >= outputs || e.col != 0 {
                    return Err(Error::Shape(format!("bias entry out of range in layer {l}")));
                }
                layer.bias[e.row] = e.value;
                inputs * outputs + e.row
            } else {
                layer.weights[e.row * inputs + e.col] = e.value;
                e.row * inputs + e.col
            };
            if std::mem::replace(&mut seen[slot], true) {
                return Err(Error::Shape(format!("duplicate entry in layer {l}")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Shape(format!("missing entries in layer {l}")));
        }
        layers.push(layer);
    }
    MlpParams::from_layers(layers)
}

pub fn save_checkpoint(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(params, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file))
}
