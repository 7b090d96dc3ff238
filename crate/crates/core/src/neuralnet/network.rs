//! Layer stacks with forward and backward passes over batches.

use rand::Rng;

use super::config::{LayerSpec, LossKind, ModelConfig, Shape};
use super::ops::{
    self, channel_moments, conv_backward_raw, conv_forward_raw, pool_forward_raw, softmax_in_place, ConvGeom, PoolMode,
    RunningStats, BN_EPSILON,
};
use super::{adam_step, AdamState, Tensor};
use crate::rng;
use crate::{Error, Result};

const INIT_KEY: u64 = 0x494e_4954;
const DROPOUT_KEY: u64 = 0x4452_4f50;

/// How a forward pass treats batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Running statistics, no dropout.
    Eval,
    /// Batch statistics (folded into the running ones) and dropout masks
    /// drawn from a stream keyed by `dropout_key` and the layer index.
    Train { dropout_key: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    input: Shape,
    output: Shape,
    params: Vec<Tensor>,
    stats: Option<RunningStats>,
}

enum Cache {
    None,
    Input(Vec<f64>),
    Output(Vec<f64>),
    ArgMax(Vec<usize>),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64>, batch: bool },
    Mask(Vec<f64>),
}

/// Activations retained by a forward pass for the matching backward pass.
pub struct Trace {
    n: usize,
    caches: Vec<Cache>,
    output: Tensor,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

fn uniform_tensor(shape: &[usize], limit: f64, key: &[u64]) -> Tensor {
    let mut r = rng::stream(key);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = r.random_range(-limit..limit);
    }
    t.round_to_f32();
    t
}

impl Layer {
    fn new(spec: LayerSpec, input: Shape, index: usize, seed: u64, next_is_relu: bool) -> Result<Self> {
        let output = spec.output_shape(input)?;
        let key = [seed, INIT_KEY, index as u64];
        let limit = |fan_in: usize, fan_out: usize| {
            if next_is_relu {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            }
        };
        let (params, stats) = match (spec, input) {
            (LayerSpec::Conv1d { channels, kernel, .. }, Shape::Seq { channels: cin, .. }) => (
                vec![
                    uniform_tensor(&[channels, cin, kernel], limit(cin * kernel, channels * kernel), &key),
                    Tensor::zeros(&[channels]),
                ],
                None,
            ),
            (LayerSpec::Dense { units }, Shape::Flat(d)) => (
                vec![uniform_tensor(&[units, d], limit(d, units), &key), Tensor::zeros(&[units])],
                None,
            ),
            (LayerSpec::BatchNorm, s) => {
                let c = s.channels_len().0;
                (
                    vec![Tensor::filled(&[c], 1.0), Tensor::zeros(&[c])],
                    Some(RunningStats::new(c)),
                )
            }
            _ => (Vec::new(), None),
        };
        Ok(Self {
            spec,
            input,
            output,
            params,
            stats,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn running_stats(&self) -> Option<&RunningStats> {
        self.stats.as_ref()
    }

    fn param_names(&self) -> &'static [&'static str] {
        match self.spec {
            LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. } => &["weight", "bias"],
            LayerSpec::BatchNorm => &["gamma", "beta"],
            _ => &[],
        }
    }

    /// Output and cache; in train mode a batch-norm layer also returns the
    /// batch moments for the caller to fold into its running statistics.
    #[allow(clippy::type_complexity)]
    fn forward(&self, x: &[f64], n: usize, mode: Mode, index: usize) -> Result<(Vec<f64>, Cache, Option<(Vec<f64>, Vec<f64>)>)> {
        let din = self.input.numel();
        let dout = self.output.numel();
        match self.spec {
            LayerSpec::Conv1d {
                channels,
                kernel,
                stride,
                padding,
            } => {
                let (cin, len) = self.input.channels_len();
                let g = ConvGeom {
                    cin,
                    cout: channels,
                    len,
                    k: kernel,
                    stride,
                    pad: padding,
                    out_len: self.output.channels_len().1,
                };
                let mut out = vec![0.0; n * dout];
                let (w, b) = (self.params[0].data(), self.params[1].data());
                for i in 0..n {
                    conv_forward_raw(g, &x[i * din..(i + 1) * din], w, b, &mut out[i * dout..(i + 1) * dout]);
                }
                Ok((out, Cache::Input(x.to_vec()), None))
            }
            LayerSpec::MaxPool { size, stride } | LayerSpec::AvgPool { size, stride } => {
                let (c, len) = self.input.channels_len();
                let pool_mode = if matches!(self.spec, LayerSpec::MaxPool { .. }) {
                    PoolMode::Max
                } else {
                    PoolMode::Avg
                };
                let out_len = self.output.channels_len().1;
                let (out, arg) = pool_forward_raw(x, n * c, len, size, stride, pool_mode, out_len);
                Ok((out, if pool_mode == PoolMode::Max { Cache::ArgMax(arg) } else { Cache::None }, None))
            }
            LayerSpec::BatchNorm => {
                let (c, l) = self.input.channels_len();
                let stats = self.stats.as_ref().expect("batchnorm layer has running stats");
                let (mean, var, batch) = match mode {
                    Mode::Train { .. } => {
                        if n < 2 {
                            return Err(Error::arg("batch normalization in train mode needs at least 2 samples"));
                        }
                        let (m, v) = channel_moments(x, n, c, l);
                        (m, v, true)
                    }
                    Mode::Eval => (stats.mean.clone(), stats.var.clone(), false),
                };
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
                let (gamma, beta) = (self.params[0].data(), self.params[1].data());
                let mut xhat = vec![0.0; x.len()];
                let mut out = vec![0.0; x.len()];
                for i in 0..n {
                    for ch in 0..c {
                        for j in (i * c + ch) * l..(i * c + ch + 1) * l {
                            xhat[j] = (x[j] - mean[ch]) * inv_std[ch];
                            out[j] = gamma[ch] * xhat[j] + beta[ch];
                        }
                    }
                }
                let moments = batch.then(|| (mean, var));
                Ok((out, Cache::Norm { xhat, inv_std, batch }, moments))
            }
            LayerSpec::Relu => {
                let out: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
                Ok((out.clone(), Cache::Output(out), None))
            }
            LayerSpec::Sigmoid => {
                let out: Vec<f64> = x.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
                Ok((out.clone(), Cache::Output(out), None))
            }
            LayerSpec::Dropout { rate } => match mode {
                Mode::Train { dropout_key } if rate > 0.0 => {
                    let mut r = rng::stream(&[dropout_key, DROPOUT_KEY, index as u64]);
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| if r.random::<f64>() < rate { 0.0 } else { keep })
                        .collect();
                    let out = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    Ok((out, Cache::Mask(mask), None))
                }
                _ => Ok((x.to_vec(), Cache::None, None)),
            },
            LayerSpec::Flatten => Ok((x.to_vec(), Cache::None, None)),
            LayerSpec::Dense { units } => {
                let (w, b) = (self.params[0].data(), self.params[1].data());
                let mut out = vec![0.0; n * units];
                for i in 0..n {
                    let xi = &x[i * din..(i + 1) * din];
                    for (o, slot) in out[i * units..(i + 1) * units].iter_mut().enumerate() {
                        *slot = b[o] + ops::dot(&w[o * din..(o + 1) * din], xi);
                    }
                }
                Ok((out, Cache::Input(x.to_vec()), None))
            }
            LayerSpec::Softmax => {
                let mut out = x.to_vec();
                for row in out.chunks_mut(din) {
                    softmax_in_place(row);
                }
                Ok((out.clone(), Cache::Output(out), None))
            }
        }
    }

    /// Returns the input gradient; parameter gradients are added to `grads`.
    fn backward(&self, gout: &[f64], n: usize, cache: &Cache, grads: &mut [Tensor]) -> Vec<f64> {
        let din = self.input.numel();
        let dout = self.output.numel();
        match (self.spec, cache) {
            (
                LayerSpec::Conv1d {
                    channels,
                    kernel,
                    stride,
                    padding,
                },
                Cache::Input(x),
            ) => {
                let (cin, len) = self.input.channels_len();
                let g = ConvGeom {
                    cin,
                    cout: channels,
                    len,
                    k: kernel,
                    stride,
                    pad: padding,
                    out_len: self.output.channels_len().1,
                };
                let mut gx = vec![0.0; n * din];
                let (gw, gb) = grads.split_at_mut(1);
                for i in 0..n {
                    conv_backward_raw(
                        g,
                        &x[i * din..(i + 1) * din],
                        self.params[0].data(),
                        &gout[i * dout..(i + 1) * dout],
                        &mut gx[i * din..(i + 1) * din],
                        gw[0].data_mut(),
                        gb[0].data_mut(),
                    );
                }
                gx
            }
            (LayerSpec::MaxPool { .. }, Cache::ArgMax(arg)) => {
                let mut gx = vec![0.0; n * din];
                for (&a, &g) in arg.iter().zip(gout) {
                    gx[a] += g;
                }
                gx
            }
            (LayerSpec::AvgPool { size, stride }, _) => {
                let (c, len) = self.input.channels_len();
                let out_len = self.output.channels_len().1;
                let mut gx = vec![0.0; n * din];
                let scale = 1.0 / size as f64;
                for r in 0..n * c {
                    for t in 0..out_len {
                        let g = gout[r * out_len + t] * scale;
                        for v in &mut gx[r * len + t * stride..r * len + t * stride + size] {
                            *v += g;
                        }
                    }
                }
                gx
            }
            (LayerSpec::BatchNorm, Cache::Norm { xhat, inv_std, batch }) => {
                let (c, l) = self.input.channels_len();
                let gamma = self.params[0].data();
                let m = (n * l) as f64;
                let mut gx = vec![0.0; n * din];
                for ch in 0..c {
                    let idx = (0..n).flat_map(|i| (i * c + ch) * l..(i * c + ch + 1) * l);
                    let (mut sg, mut sgx) = (0.0, 0.0);
                    for j in idx.clone() {
                        sg += gout[j];
                        sgx += gout[j] * xhat[j];
                    }
                    grads[0].data_mut()[ch] += sgx;
                    grads[1].data_mut()[ch] += sg;
                    let k = gamma[ch] * inv_std[ch];
                    for j in idx {
                        gx[j] = if *batch {
                            k * (gout[j] - sg / m - xhat[j] * sgx / m)
                        } else {
                            k * gout[j]
                        };
                    }
                }
                gx
            }
            (LayerSpec::Relu, Cache::Output(y)) => gout.iter().zip(y).map(|(g, &y)| if y > 0.0 { *g } else { 0.0 }).collect(),
            (LayerSpec::Sigmoid, Cache::Output(y)) => gout.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect(),
            (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => gout.iter().zip(mask).map(|(g, m)| g * m).collect(),
            (LayerSpec::Dense { units }, Cache::Input(x)) => {
                let w = self.params[0].data();
                let mut gx = vec![0.0; n * din];
                let (gw, gb) = grads.split_at_mut(1);
                let (gw, gb) = (gw[0].data_mut(), gb[0].data_mut());
                for i in 0..n {
                    let xi = &x[i * din..(i + 1) * din];
                    let gxi = &mut gx[i * din..(i + 1) * din];
                    for o in 0..units {
                        let g = gout[i * units + o];
                        if g == 0.0 {
                            continue;
                        }
                        gb[o] += g;
                        let wrow = &w[o * din..(o + 1) * din];
                        for ((gwv, &xv), (gxv, &wv)) in gw[o * din..(o + 1) * din].iter_mut().zip(xi).zip(gxi.iter_mut().zip(wrow)) {
                            *gwv += g * xv;
                            *gxv += g * wv;
                        }
                    }
                }
                gx
            }
            (LayerSpec::Softmax, Cache::Output(p)) => {
                let mut gx = vec![0.0; n * din];
                for ((gxr, gr), pr) in gx.chunks_mut(din).zip(gout.chunks(din)).zip(p.chunks(din)) {
                    let dot: f64 = gr.iter().zip(pr).map(|(a, b)| a * b).sum();
                    for ((v, g), p) in gxr.iter_mut().zip(gr).zip(pr) {
                        *v = p * (g - dot);
                    }
                }
                gx
            }
            _ => gout.to_vec(),
        }
    }
}

/// An ordered stack of layers with its parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    input: Shape,
    layers: Vec<Layer>,
}

impl Sequential {
    /// Builds and initializes the stack. Weights are fan-in scaled uniform
    /// draws, one stream per layer keyed by `seed` and the layer index.
    pub fn new(specs: &[LayerSpec], input: Shape, seed: u64) -> Result<Self> {
        let mut shape = input;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let next_is_relu = specs[i + 1..]
                .iter()
                .find(|s| !matches!(s, LayerSpec::BatchNorm))
                .is_some_and(|s| matches!(s, LayerSpec::Relu));
            let layer = Layer::new(*spec, shape, i, seed, next_is_relu)
                .map_err(|e| Error::shape(format!("layer {i} ({spec}): {e}")))?;
            shape = layer.output;
            layers.push(layer);
        }
        Ok(Self { input, layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().map_or(self.input, |l| l.output)
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    /// Named tensors in a fixed order: parameters, then running statistics.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (name, t) in l.param_names().iter().zip(&l.params) {
                out.push((format!("layer{i}.{name}"), t.clone()));
            }
            if let Some(s) = &l.stats {
                out.push((format!("layer{i}.running_mean"), Tensor::vector(s.mean.clone()).expect("non-empty")));
                out.push((format!("layer{i}.running_var"), Tensor::vector(s.var.clone()).expect("non-empty")));
            }
        }
        out
    }

    /// Replaces parameters and running statistics from named tensors; every
    /// expected name must be present with the expected shape.
    pub fn load_named(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let find = |name: &str, shape: &[usize]| -> Result<Tensor> {
            let t = tensors
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            Ok(t.clone())
        };
        for (i, l) in self.layers.iter_mut().enumerate() {
            let names = l.param_names();
            for (name, p) in names.iter().zip(l.params.iter_mut()) {
                *p = find(&format!("layer{i}.{name}"), p.shape())?;
            }
            if let Some(s) = &mut l.stats {
                let c = s.mean.len();
                s.mean = find(&format!("layer{i}.running_mean"), &[c])?.into_data();
                s.var = find(&format!("layer{i}.running_var"), &[c])?.into_data();
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        let n = x.shape()[0];
        if x.rank() < 2 || x.len() != n * self.input.numel() {
            return Err(Error::shape(format!(
                "batch of shape {:?} does not match per-sample input {}",
                x.shape(),
                self.input
            )));
        }
        Ok(n)
    }

    fn output_tensor(&self, n: usize, data: Vec<f64>) -> Result<Tensor> {
        let mut shape = vec![n];
        shape.extend(self.output_shape().dims());
        Tensor::new(shape, data)
    }

    /// Eval-mode forward pass of a batch `[N, ...input dims]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let mut act = x.data().to_vec();
        for (i, l) in self.layers.iter().enumerate() {
            act = l.forward(&act, n, Mode::Eval, i)?.0;
        }
        self.output_tensor(n, act)
    }

    /// Forward pass keeping what the backward pass needs. Train mode
    /// updates the batch-norm running statistics.
    pub fn forward_trace(&mut self, x: &Tensor, mode: Mode) -> Result<Trace> {
        let n = self.check_input(x)?;
        let mut act = x.data().to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter_mut().enumerate() {
            let (out, cache, moments) = l.forward(&act, n, mode, i)?;
            if let (Some((m, v)), Some(stats)) = (moments, l.stats.as_mut()) {
                stats.update(&m, &v);
                for s in stats.mean.iter_mut().chain(stats.var.iter_mut()) {
                    *s = f64::from(*s as f32);
                }
            }
            act = out;
            caches.push(cache);
        }
        Ok(Trace {
            n,
            caches,
            output: self.output_tensor(n, act)?,
        })
    }

    /// Parameter gradients (in `params()` order) for an output gradient.
    pub fn backward(&self, trace: &Trace, grad_output: &Tensor) -> Result<Vec<Tensor>> {
        self.backward_with_input(trace, grad_output).map(|(g, _)| g)
    }

    /// Parameter gradients plus the gradient with respect to the input.
    pub fn backward_with_input(&self, trace: &Trace, grad_output: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        if grad_output.shape() != trace.output.shape() {
            return Err(Error::shape(format!(
                "output gradient {:?} does not match output {:?}",
                grad_output.shape(),
                trace.output.shape()
            )));
        }
        let mut per_layer: Vec<Vec<Tensor>> = self
            .layers
            .iter()
            .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect();
        let mut g = grad_output.data().to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            g = l.backward(&g, trace.n, &trace.caches[i], &mut per_layer[i]);
        }
        let mut shape = vec![trace.n];
        shape.extend(self.input.dims());
        Ok((per_layer.into_iter().flatten().collect(), Tensor::new(shape, g)?))
    }

    /// Rounds parameters and running statistics to `f32` precision.
    pub fn quantize(&mut self) {
        for l in &mut self.layers {
            for p in &mut l.params {
                p.round_to_f32();
            }
            if let Some(s) = &mut l.stats {
                for v in s.mean.iter_mut().chain(s.var.iter_mut()) {
                    *v = f64::from(*v as f32);
                }
            }
        }
    }
}

/// Loss of class probabilities `[N, C]` against integer labels, and its
/// gradient with respect to the probabilities.
pub fn loss_and_grad(kind: LossKind, probs: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    match kind {
        LossKind::CrossEntropy => {
            let loss = ops::cross_entropy(probs, labels)?;
            Ok((loss, ops::cross_entropy_grad(probs, labels)))
        }
        LossKind::Msle => {
            let target = one_hot(labels, probs.shape()[1])?;
            let loss = ops::msle_loss(probs, &target)?;
            Ok((loss, ops::msle_grad(probs, &target)))
        }
    }
}

/// `[N, classes]` one-hot encoding.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(&[labels.len().max(1), classes]);
    for (i, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::arg(format!("label {y} out of range for {classes} classes")));
        }
        t.data_mut()[i * classes + y] = 1.0;
    }
    Ok(t)
}

/// A classifier: configuration plus an initialized layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: ModelConfig,
    stack: Sequential,
}

impl Network {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let stack = Sequential::new(&config.layers, config.input_shape(), config.seed)?;
        Ok(Self { config, stack })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn stack(&self) -> &Sequential {
        &self.stack
    }

    pub fn stack_mut(&mut self) -> &mut Sequential {
        &mut self.stack
    }

    /// Accepts `[N, D]` or `[N, 1, D]` input.
    fn as_batch(&self, x: &Tensor) -> Result<Tensor> {
        let d = self.config.input_dim;
        match *x.shape() {
            [n, dd] | [n, 1, dd] if dd == d => x.clone().reshape(&[n, 1, d]),
            _ => Err(Error::shape(format!(
                "expected a batch of shape [N, 1, {d}], got {:?}",
                x.shape()
            ))),
        }
    }

    /// Class probabilities `[N, n_classes]`.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let batch = self.as_batch(x)?;
        match mode {
            Mode::Eval => self.stack.forward(&batch),
            Mode::Train { .. } => {
                let mut scratch = self.stack.clone();
                Ok(scratch.forward_trace(&batch, mode)?.output)
            }
        }
    }

    /// Loss and parameter gradients for one batch. Train mode updates the
    /// running statistics.
    pub fn loss_and_grads(&mut self, x: &Tensor, labels: &[usize], mode: Mode) -> Result<(f64, Vec<Tensor>)> {
        let batch = self.as_batch(x)?;
        if labels.len() != batch.shape()[0] {
            return Err(Error::shape(format!("{} labels for {} samples", labels.len(), batch.shape()[0])));
        }
        let trace = self.stack.forward_trace(&batch, mode)?;
        let (loss, gp) = loss_and_grad(self.config.loss, trace.output(), labels)?;
        let grads = self.stack.backward(&trace, &gp)?;
        if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
            return Err(Error::Numeric("non-finite loss or gradient".into()));
        }
        Ok((loss, grads))
    }

    /// One optimizer step on a batch; returns the batch loss.
    pub fn train_step(&mut self, x: &Tensor, labels: &[usize], dropout_key: u64, adam: &mut AdamState) -> Result<f64> {
        let (loss, grads) = self.loss_and_grads(x, labels, Mode::Train { dropout_key })?;
        let cfg = self.config.optimizer;
        adam_step(&mut self.stack.params_mut(), &grads, adam, &cfg)?;
        self.stack.quantize();
        Ok(loss)
    }

    pub fn adam_state(&self) -> AdamState {
        AdamState::new(self.stack.params())
    }
}
