//! Fully connected network mapping (quote, parameters) to implied volatility:
//! min-max input scaling, dense hidden layers, linear scalar output, MSE loss
//! trained by Adam.
//!
//! Matrices are row-major `f64` slices. A weight matrix has shape
//! `fan_in × fan_out`, so a batch `X` (rows = samples) maps to `X·W + b`.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::seeded;

/// Rows per chunk when evaluating large batches in parallel.
const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// No nonlinearity; the whole network is then affine.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    GlorotUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    #[serde(default = "default_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default = "default_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default = "default_init")]
    pub init: Init,
    #[serde(default)]
    pub seed: u64,
}

fn default_hidden_layers() -> usize {
    4
}
fn default_hidden_width() -> usize {
    200
}
fn default_activation() -> Activation {
    Activation::Relu
}
fn default_init() -> Init {
    Init::GlorotUniform
}

impl NetworkSpec {
    pub fn new(input_dim: usize, hidden_layers: usize, hidden_width: usize) -> Self {
        NetworkSpec {
            input_dim,
            hidden_layers,
            hidden_width,
            activation: Activation::Relu,
            init: Init::GlorotUniform,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(Error::config(
                "input_dim, hidden_layers and hidden_width must be at least 1",
            ));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every layer, output layer last.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = vec![(self.input_dim, self.hidden_width)];
        shapes.extend((1..self.hidden_layers).map(|_| (self.hidden_width, self.hidden_width)));
        shapes.push((self.hidden_width, 1));
        shapes
    }

    pub fn param_count(&self) -> usize {
        self.shapes().iter().map(|&(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_in × fan_out`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            w: vec![0.0; fan_in * fan_out],
            b: vec![0.0; fan_out],
        }
    }

    pub fn from_rows(w: &[Vec<f64>], b: &[f64]) -> Result<Self> {
        let fan_in = w.len();
        let fan_out = b.len();
        if fan_in == 0 || fan_out == 0 || w.iter().any(|r| r.len() != fan_out) {
            return Err(Error::malformed(
                "layer",
                format!("weights must be {fan_in}×{fan_out}"),
            ));
        }
        Ok(Layer {
            fan_in,
            fan_out,
            w: w.concat(),
            b: b.to_vec(),
        })
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.w.chunks(self.fan_out).map(<[f64]>::to_vec).collect()
    }
}

/// `C = A·B + beta·C` for an `m×k` and a `k×n` operand given by element strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    let last = |r: usize, cs: usize, rows: usize, cols: usize| (rows - 1) * r + (cols - 1) * cs;
    assert!(m > 0 && k > 0 && n > 0);
    assert!(last(rsa, csa, m, k) < a.len());
    assert!(last(rsb, csb, k, n) < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above keep every addressed element of A, B and the
    // row-major m×n block of C inside its slice, and C does not alias A or B.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRange {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub input_ranges: Vec<InputRange>,
    pub layers: Vec<Layer>,
}

/// Per-layer gradients of the batch MSE, same shapes as the layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub layers: Vec<Layer>,
}

/// Buffers reused across batches of one size.
struct Workspace {
    rows: usize,
    /// `acts[0]` is the scaled input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    /// Inverted-dropout scale per hidden unit (empty when dropout is off).
    masks: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(net: &Network, rows: usize) -> Self {
        let mut acts = vec![vec![0.0; rows * net.spec.input_dim]];
        acts.extend(net.layers.iter().map(|l| vec![0.0; rows * l.fan_out]));
        let deltas = net
            .layers
            .iter()
            .map(|l| vec![0.0; rows * l.fan_out])
            .collect();
        Workspace {
            rows,
            acts,
            deltas,
            masks: Vec::new(),
        }
    }
}

impl Network {
    /// Freshly initialised network: Glorot-uniform weights, zero biases.
    pub fn new(spec: NetworkSpec, input_ranges: &[(f64, f64)]) -> Result<Self> {
        spec.validate()?;
        let ranges = check_ranges(&spec, input_ranges)?;
        let mut rng = seeded(spec.seed);
        let layers = spec
            .shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    fan_in,
                    fan_out,
                    w,
                    b: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Network {
            spec,
            input_ranges: ranges,
            layers,
        })
    }

    /// Network from explicit layers; shapes must chain to a scalar output.
    pub fn from_layers(
        spec: NetworkSpec,
        input_ranges: &[(f64, f64)],
        layers: Vec<Layer>,
    ) -> Result<Self> {
        spec.validate()?;
        let ranges = check_ranges(&spec, input_ranges)?;
        let want = spec.shapes();
        let got: Vec<(usize, usize)> = layers.iter().map(|l| (l.fan_in, l.fan_out)).collect();
        if want != got {
            return Err(Error::malformed(
                "network",
                format!("layer shapes {got:?} do not match spec {want:?}"),
            ));
        }
        for l in &layers {
            if l.w.len() != l.fan_in * l.fan_out || l.b.len() != l.fan_out {
                return Err(Error::malformed("network", "layer buffer sizes"));
            }
            if l.w.iter().chain(&l.b).any(|v| !v.is_finite()) {
                return Err(Error::malformed("network", "non-finite weight"));
            }
        }
        Ok(Network {
            spec,
            input_ranges: ranges,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_batch(&self, x: &[f64]) -> Result<usize> {
        let d = self.input_dim();
        if x.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len() % d,
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: format!("input[{}][{}]", i / d, i % d),
                reason: "not finite".into(),
            });
        }
        Ok(x.len() / d)
    }

    fn scale_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.input_dim();
        for (row_in, row_out) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            for ((o, &v), r) in row_out.iter_mut().zip(row_in).zip(&self.input_ranges) {
                *o = (v - r.low) / (r.high - r.low);
            }
        }
    }

    /// Min-max scales raw row-major inputs to the unit box.
    pub fn scale_inputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_batch(x)?;
        let mut out = vec![0.0; x.len()];
        self.scale_into(x, &mut out);
        Ok(out)
    }

    /// Forward pass on `ws.acts[0]` (already scaled). Hidden outputs get the
    /// activation and, when `ws.masks` is populated, the dropout scale.
    fn forward_ws(&self, ws: &mut Workspace) {
        let n = ws.rows;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(l + 1);
            let input = &done[l];
            let out = &mut rest[0][..n * layer.fan_out];
            for row in out.chunks_exact_mut(layer.fan_out) {
                row.copy_from_slice(&layer.b);
            }
            gemm(
                n,
                layer.fan_in,
                layer.fan_out,
                input,
                (layer.fan_in, 1),
                &layer.w,
                (layer.fan_out, 1),
                1.0,
                out,
            );
            if l == last {
                continue;
            }
            if self.spec.activation == Activation::Relu {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            if let Some(mask) = ws.masks.get(l) {
                for (v, s) in out.iter_mut().zip(mask) {
                    *v *= s;
                }
            }
        }
    }

    /// Backward pass after `forward_ws`, with `ws.deltas[last]` holding the
    /// loss derivative w.r.t. the output. Fills `grads` (overwriting).
    fn backward_ws(&self, ws: &mut Workspace, grads: &mut [Layer]) {
        let n = ws.rows;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let delta = &ws.deltas[l][..n * layer.fan_out];
            let g = &mut grads[l];
            gemm(
                layer.fan_in,
                n,
                layer.fan_out,
                &ws.acts[l],
                (1, layer.fan_in),
                delta,
                (layer.fan_out, 1),
                0.0,
                &mut g.w,
            );
            g.b.iter_mut().for_each(|v| *v = 0.0);
            for row in delta.chunks_exact(layer.fan_out) {
                for (s, v) in g.b.iter_mut().zip(row) {
                    *s += v;
                }
            }
            if l == 0 {
                break;
            }
            let (before, after) = ws.deltas.split_at_mut(l);
            let prev = &mut before[l - 1][..n * layer.fan_in];
            let delta = &after[0][..n * layer.fan_out];
            gemm(
                n,
                layer.fan_out,
                layer.fan_in,
                delta,
                (layer.fan_out, 1),
                &layer.w,
                (1, layer.fan_out),
                0.0,
                prev,
            );
            let act = &ws.acts[l];
            let relu = self.spec.activation == Activation::Relu;
            match ws.masks.get(l - 1) {
                Some(mask) => {
                    for ((d, &a), &s) in prev.iter_mut().zip(act).zip(mask) {
                        *d = if relu && a <= 0.0 { 0.0 } else { *d * s };
                    }
                }
                None if relu => {
                    for (d, &a) in prev.iter_mut().zip(act) {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    }
                }
                None => {}
            }
        }
    }

    fn forward_chunk(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len() / self.input_dim();
        let mut ws = Workspace::new(self, n);
        self.scale_into(x, &mut ws.acts[0]);
        self.forward_ws(&mut ws);
        ws.acts.pop().unwrap()
    }

    /// Predicted IV for every row of the row-major batch `x`. Rows are
    /// evaluated independently.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.check_batch(x)?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let d = self.input_dim();
        Ok(x.par_chunks(EVAL_CHUNK * d)
            .flat_map_iter(|chunk| self.forward_chunk(chunk))
            .collect())
    }

    /// Gradient of the batch MSE `(1/n)Σ(F(x) − y)²` w.r.t. every weight and bias.
    pub fn backward(&self, x: &[f64], targets: &[f64]) -> Result<Gradients> {
        let n = self.check_batch(x)?;
        if targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: targets.len(),
            });
        }
        if n == 0 {
            return Err(Error::config("empty batch"));
        }
        let mut ws = Workspace::new(self, n);
        self.scale_into(x, &mut ws.acts[0]);
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in, l.fan_out))
            .collect();
        let loss = self.loss_and_output_delta(&mut ws, targets);
        self.backward_ws(&mut ws, &mut grads);
        Ok(Gradients {
            loss,
            layers: grads,
        })
    }

    fn loss_and_output_delta(&self, ws: &mut Workspace, targets: &[f64]) -> f64 {
        self.forward_ws(ws);
        let n = ws.rows;
        let out = &ws.acts[self.layers.len()][..n];
        let delta = &mut ws.deltas[self.layers.len() - 1][..n];
        let mut sse = 0.0;
        for ((d, &y), &t) in delta.iter_mut().zip(out).zip(targets) {
            let r = y - t;
            sse += r * r;
            *d = 2.0 * r / n as f64;
        }
        sse / n as f64
    }

    /// Gradient of the scalar output w.r.t. one raw (unscaled) input vector.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        self.check_batch(x)?;
        let mut ws = Workspace::new(self, 1);
        self.scale_into(x, &mut ws.acts[0]);
        self.forward_ws(&mut ws);
        ws.deltas[self.layers.len() - 1][0] = 1.0;
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.fan_in, l.fan_out))
            .collect();
        self.backward_ws(&mut ws, &mut grads);
        let first = &self.layers[0];
        let delta = &ws.deltas[0];
        Ok((0..d)
            .map(|i| {
                let row = &first.w[i * first.fan_out..(i + 1) * first.fan_out];
                let g: f64 = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                let r = self.input_ranges[i];
                g / (r.high - r.low)
            })
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = WeightsFile {
            spec: self.spec,
            input_ranges: self.input_ranges.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    w: l.rows(),
                    b: l.b.clone(),
                })
                .collect(),
            seed: self.spec.seed,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &file)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Network> {
        let reader = BufReader::new(File::open(path)?);
        let file: WeightsFile = serde_json::from_reader(reader)
            .map_err(|e| Error::malformed("weights file", format!("{}: {e}", path.display())))?;
        let layers = file
            .layers
            .iter()
            .map(|l| Layer::from_rows(&l.w, &l.b))
            .collect::<Result<Vec<_>>>()?;
        let ranges: Vec<(f64, f64)> = file.input_ranges.iter().map(|r| (r.low, r.high)).collect();
        Network::from_layers(file.spec, &ranges, layers)
    }
}

fn check_ranges(spec: &NetworkSpec, ranges: &[(f64, f64)]) -> Result<Vec<InputRange>> {
    if ranges.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: ranges.len(),
        });
    }
    ranges
        .iter()
        .map(|&(low, high)| {
            if low.is_finite() && high.is_finite() && low < high {
                Ok(InputRange { low, high })
            } else {
                Err(Error::config(format!(
                    "input range [{low}, {high}] invalid"
                )))
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsFile {
    spec: NetworkSpec,
    input_ranges: Vec<InputRange>,
    layers: Vec<LayerFile>,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr_halving_period: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lr_halving_period: 500,
            epochs: 8000,
            batch_size: 1024,
            dropout_rate: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        if !(self.initial_lr > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::config("initial_lr and epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if self.lr_halving_period == 0 {
            return Err(Error::config("lr_halving_period must be at least 1"));
        }
        Ok(())
    }

    /// Learning rate in force during 0-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let halvings = (epoch / self.lr_halving_period).min(1100) as i32;
        self.initial_lr * 0.5f64.powi(halvings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Mean of the per-batch losses seen during the epoch, weighted by batch size.
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

/// Row-major inputs with one target per row.
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        let zeros = || -> Vec<Layer> {
            net.layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in, l.fan_out))
                .collect()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &[Layer], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update(
                &mut layer.w,
                &grads[l].w,
                &mut self.m[l].w,
                &mut self.v[l].w,
            );
            update(
                &mut layer.b,
                &grads[l].b,
                &mut self.m[l].b,
                &mut self.v[l].b,
            );
        }
    }
}

/// Trains with Adam on seeded mini-batch shuffles, halving the learning rate
/// every `lr_halving_period` epochs. The last short batch of an epoch is used.
/// `on_epoch` sees each epoch's statistics as they are produced.
pub fn train_with(
    mut net: Network,
    data: Samples<'_>,
    val: Option<Samples<'_>>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Network, Vec<EpochStats>)> {
    cfg.validate()?;
    let n = net.check_batch(data.x)?;
    if n == 0 || data.y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: data.y.len(),
        });
    }
    if let Some(v) = val {
        let nv = net.check_batch(v.x)?;
        if nv == 0 || v.y.len() != nv {
            return Err(Error::DimensionMismatch {
                expected: nv,
                got: v.y.len(),
            });
        }
    }
    let d = net.input_dim();
    let scaled = net.scale_inputs(data.x)?;
    let mut rng = seeded(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.min(n);
    let mut full = Workspace::new(&net, batch);
    let mut tail = (n % batch != 0).then(|| Workspace::new(&net, n % batch));
    let mut grads: Vec<Layer> = net
        .layers
        .iter()
        .map(|l| Layer::zeros(l.fan_in, l.fan_out))
        .collect();
    let mut targets = vec![0.0; batch];
    let mut adam = Adam::new(&net);
    let keep = 1.0 - cfg.dropout_rate;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for ids in order.chunks(batch) {
            let ws = if ids.len() == batch {
                &mut full
            } else {
                tail.as_mut().expect("tail workspace")
            };
            for (r, &i) in ids.iter().enumerate() {
                ws.acts[0][r * d..(r + 1) * d].copy_from_slice(&scaled[i * d..(i + 1) * d]);
                targets[r] = data.y[i];
            }
            if cfg.dropout_rate > 0.0 {
                ws.masks = net.layers[..net.layers.len() - 1]
                    .iter()
                    .map(|l| {
                        (0..ids.len() * l.fan_out)
                            .map(|_| {
                                if rng.random::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
            }
            let loss = net.loss_and_output_delta(ws, &targets[..ids.len()]);
            net.backward_ws(ws, &mut grads);
            adam.step(&mut net, &grads, lr, cfg);
            sse += loss * ids.len() as f64;
        }
        let train_mse = sse / n as f64;
        if !train_mse.is_finite() {
            return Err(Error::TrainingDiverged(epoch));
        }
        let val_mse = match val {
            Some(v) => Some(mse(&net.forward(v.x)?, v.y)),
            None => None,
        };
        let stats = EpochStats {
            epoch,
            lr,
            train_mse,
            val_mse,
        };
        on_epoch(&stats);
        trace.push(stats);
    }
    Ok((net, trace))
}

pub fn train(
    net: Network,
    data: Samples<'_>,
    val: Option<Samples<'_>>,
    cfg: &TrainConfig,
) -> Result<(Network, Vec<EpochStats>)> {
    train_with(net, data, val, cfg, |_| {})
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub mape: f64,
    pub r2: f64,
}

impl Metrics {
    pub fn compute(pred: &[f64], targets: &[f64]) -> Result<Metrics> {
        if pred.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: targets.len(),
                got: pred.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::config("metrics need at least one sample"));
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let sst: f64 = targets.iter().map(|t| (t - mean) * (t - mean)).sum();
        if sst == 0.0 {
            return Err(Error::UndefinedR2);
        }
        let (mut sse, mut sae, mut sape) = (0.0, 0.0, 0.0);
        for (&p, &t) in pred.iter().zip(targets) {
            let e = p - t;
            sse += e * e;
            sae += e.abs();
            sape += e.abs() / t.abs();
        }
        Ok(Metrics {
            mse: sse / n,
            mae: sae / n,
            mape: sape / n,
            r2: 1.0 - sse / sst,
        })
    }
}

pub fn evaluate(net: &Network, data: Samples<'_>) -> Result<Metrics> {
    Metrics::compute(&net.forward(data.x)?, data.y)
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>12} {:>12} {:>12} {:>12}", "MSE", "MAE", "MAPE", "R²")?;
        write!(
            f,
            "{:>12.4e} {:>12.4e} {:>12.4e} {:>12.6}",
            self.mse, self.mae, self.mape, self.r2
        )
    }
}
