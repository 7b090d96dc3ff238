//! Functional layer operations on single samples or batches, together with
//! the raw kernels (forward and backward) the network layers are built on.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;
pub const PROB_FLOOR: f64 = 1e-12;

/// Output length of a convolution or pooling window:
/// `(il - k + 2p) / s + 1` with floor division.
pub fn output_length(il: usize, k: usize, p: usize, s: usize) -> Result<usize> {
    if s == 0 {
        return Err(Error::shape("stride must be at least 1"));
    }
    if k == 0 {
        return Err(Error::shape("kernel size must be at least 1"));
    }
    if il + 2 * p < k {
        return Err(Error::shape(format!(
            "input length {il} with padding {p} is shorter than kernel {k}"
        )));
    }
    Ok((il + 2 * p - k) / s + 1)
}

fn pad_rows(x: &[f64], rows: usize, len: usize, p: usize) -> Vec<f64> {
    let plen = len + 2 * p;
    let mut out = vec![0.0; rows * plen];
    for r in 0..rows {
        out[r * plen + p..r * plen + p + len].copy_from_slice(&x[r * len..(r + 1) * len]);
    }
    out
}

/// Geometry of one convolution: `[cin x len] -> [cout x out_len]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub len: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_len: usize,
}

pub(crate) fn conv_forward_raw(g: ConvGeom, x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let padded;
    let (xs, plen) = if g.pad > 0 {
        padded = pad_rows(x, g.cin, g.len, g.pad);
        (padded.as_slice(), g.len + 2 * g.pad)
    } else {
        (x, g.len)
    };
    for o in 0..g.cout {
        let row = &mut out[o * g.out_len..(o + 1) * g.out_len];
        row.fill(b[o]);
        for c in 0..g.cin {
            let xrow = &xs[c * plen..(c + 1) * plen];
            for kk in 0..g.k {
                let wv = w[(o * g.cin + c) * g.k + kk];
                if g.stride == 1 {
                    for (r, &xv) in row.iter_mut().zip(&xrow[kk..kk + g.out_len]) {
                        *r += wv * xv;
                    }
                } else {
                    for (t, r) in row.iter_mut().enumerate() {
                        *r += wv * xrow[t * g.stride + kk];
                    }
                }
            }
        }
    }
}

/// Accumulates input, weight and bias gradients of one convolution.
pub(crate) fn conv_backward_raw(
    g: ConvGeom,
    x: &[f64],
    w: &[f64],
    gout: &[f64],
    gx: &mut [f64],
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let plen = g.len + 2 * g.pad;
    let padded;
    let xs = if g.pad > 0 {
        padded = pad_rows(x, g.cin, g.len, g.pad);
        padded.as_slice()
    } else {
        x
    };
    let mut gxp = vec![0.0; g.cin * plen];
    for o in 0..g.cout {
        let grow = &gout[o * g.out_len..(o + 1) * g.out_len];
        gb[o] += grow.iter().sum::<f64>();
        for c in 0..g.cin {
            let xrow = &xs[c * plen..(c + 1) * plen];
            let gxrow = &mut gxp[c * plen..(c + 1) * plen];
            for kk in 0..g.k {
                let wi = (o * g.cin + c) * g.k + kk;
                let wv = w[wi];
                if g.stride == 1 {
                    let xs = &xrow[kk..kk + g.out_len];
                    gw[wi] += grow.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                    for (gxv, &gv) in gxrow[kk..kk + g.out_len].iter_mut().zip(grow) {
                        *gxv += wv * gv;
                    }
                } else {
                    let mut acc = 0.0;
                    for (t, &gv) in grow.iter().enumerate() {
                        acc += gv * xrow[t * g.stride + kk];
                        gxrow[t * g.stride + kk] += wv * gv;
                    }
                    gw[wi] += acc;
                }
            }
        }
    }
    for c in 0..g.cin {
        let src = &gxp[c * plen + g.pad..c * plen + g.pad + g.len];
        for (d, s) in gx[c * g.len..(c + 1) * g.len].iter_mut().zip(src) {
            *d += s;
        }
    }
}

/// Single-sample 1D cross-correlation:
/// `out[o][t] = bias[o] + sum_{c,k} kernels[o][c][k] * padded[c][t*stride + k]`.
pub fn conv1d(input: &Tensor, kernels: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let (&[cin, len], &[cout, kcin, k], &[bn]) = (input.shape(), kernels.shape(), bias.shape()) else {
        return Err(Error::shape(format!(
            "conv1d expects input [C, L], kernels [O, C, K], bias [O]; got {:?}, {:?}, {:?}",
            input.shape(),
            kernels.shape(),
            bias.shape()
        )));
    };
    if kcin != cin || bn != cout {
        return Err(Error::shape(format!(
            "conv1d channel mismatch: input {cin}, kernels {kcin}->{cout}, bias {bn}"
        )));
    }
    let out_len = output_length(len, k, padding, stride)?;
    let g = ConvGeom {
        cin,
        cout,
        len,
        k,
        stride,
        pad: padding,
        out_len,
    };
    let mut out = vec![0.0; cout * out_len];
    conv_forward_raw(g, input.data(), kernels.data(), bias.data(), &mut out);
    Tensor::new(vec![cout, out_len], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Max,
    Avg,
}

/// Pools each row of `x` (`rows x len`). Returns the output and, for max
/// pooling, the flat index of every selected input.
pub(crate) fn pool_forward_raw(
    x: &[f64],
    rows: usize,
    len: usize,
    size: usize,
    stride: usize,
    mode: PoolMode,
    out_len: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut out = Vec::with_capacity(rows * out_len);
    let mut arg = Vec::new();
    for r in 0..rows {
        let row = &x[r * len..(r + 1) * len];
        for t in 0..out_len {
            let win = &row[t * stride..t * stride + size];
            match mode {
                PoolMode::Max => {
                    let (i, v) = win
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                    out.push(v);
                    arg.push(r * len + t * stride + i);
                }
                PoolMode::Avg => out.push(win.iter().sum::<f64>() / size as f64),
            }
        }
    }
    (out, arg)
}

/// Single-sample pooling over `[C x L]`.
pub fn pool1d(input: &Tensor, size: usize, stride: usize, mode: PoolMode) -> Result<Tensor> {
    let &[c, len] = input.shape() else {
        return Err(Error::shape(format!("pool1d expects [C, L], got {:?}", input.shape())));
    };
    if size == 0 || len < size {
        return Err(Error::shape(format!("pool window {size} does not fit length {len}")));
    }
    let out_len = output_length(len, size, 0, stride)?;
    let (out, _) = pool_forward_raw(input.data(), c, len, size, stride, mode, out_len);
    Tensor::new(vec![c, out_len], out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Per-channel running statistics of a batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }

    pub fn update(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        for (r, &b) in self.mean.iter_mut().zip(batch_mean) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
        for (r, &b) in self.var.iter_mut().zip(batch_var) {
            *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * b;
        }
    }
}

/// Per-channel mean and (biased) variance over `[n x c x l]`.
pub(crate) fn channel_moments(x: &[f64], n: usize, c: usize, l: usize) -> (Vec<f64>, Vec<f64>) {
    let m = (n * l) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for ch in 0..c {
        let mut s = 0.0;
        for i in 0..n {
            s += x[(i * c + ch) * l..(i * c + ch + 1) * l].iter().sum::<f64>();
        }
        mean[ch] = s / m;
        let mut v = 0.0;
        for i in 0..n {
            v += x[(i * c + ch) * l..(i * c + ch + 1) * l]
                .iter()
                .map(|&a| (a - mean[ch]).powi(2))
                .sum::<f64>();
        }
        var[ch] = v / m;
    }
    (mean, var)
}

/// Batch normalization of `[N x C x L]`.
///
/// In train mode the batch statistics are used and folded into `stats`;
/// eval mode reads `stats` without modifying them.
pub fn batchnorm(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    mode: BnMode,
    stats: &mut RunningStats,
) -> Result<Tensor> {
    let &[n, c, l] = input.shape() else {
        return Err(Error::shape(format!("batchnorm expects [N, C, L], got {:?}", input.shape())));
    };
    if gamma.len() != c || beta.len() != c || stats.mean.len() != c || stats.var.len() != c {
        return Err(Error::shape(format!("batchnorm parameters do not have {c} channels")));
    }
    let (mean, var) = match mode {
        BnMode::Train => {
            if n < 2 {
                return Err(Error::arg("batch normalization in train mode needs at least 2 samples"));
            }
            let (m, v) = channel_moments(input.data(), n, c, l);
            stats.update(&m, &v);
            (m, v)
        }
        BnMode::Eval => (stats.mean.clone(), stats.var.clone()),
    };
    let mut out = input.data().to_vec();
    for i in 0..n {
        for ch in 0..c {
            let inv = 1.0 / (var[ch] + BN_EPSILON).sqrt();
            for v in &mut out[(i * c + ch) * l..(i * c + ch + 1) * l] {
                *v = gamma.data()[ch] * (*v - mean[ch]) * inv + beta.data()[ch];
            }
        }
    }
    Tensor::new(input.shape().to_vec(), out)
}

/// `weights * input + bias` for one sample.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (&[din], &[dout, wdin], &[bn]) = (input.shape(), weights.shape(), bias.shape()) else {
        return Err(Error::shape(format!(
            "dense expects input [D], weights [O, D], bias [O]; got {:?}, {:?}, {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    };
    if wdin != din || bn != dout {
        return Err(Error::shape(format!(
            "dense mismatch: input {din}, weights {dout}x{wdin}, bias {bn}"
        )));
    }
    let x = input.data();
    let out = (0..dout)
        .map(|o| {
            let w = &weights.data()[o * din..(o + 1) * din];
            bias.data()[o] + dot(w, x)
        })
        .collect();
    Tensor::vector(out)
}

/// Dot product with four independent accumulators, summed in a fixed order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Numerically stable softmax of a vector.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    if !input.all_finite() {
        return Err(Error::Numeric("softmax of non-finite input".into()));
    }
    let mut out = input.data().to_vec();
    softmax_in_place(&mut out);
    Tensor::new(input.shape().to_vec(), out)
}

fn batch_rows(probs: &Tensor) -> Result<(usize, usize)> {
    match probs.shape() {
        &[n, c] => Ok((n, c)),
        s => Err(Error::shape(format!("expected [N, classes], got {s:?}"))),
    }
}

/// Mean negative log-probability of the true classes, probabilities floored
/// at 1e-12.
pub fn cross_entropy(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, c) = batch_rows(probs)?;
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} rows", labels.len())));
    }
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::arg(format!("label {y} out of range for {c} classes")));
        }
        total -= probs.data()[i * c + y].max(PROB_FLOOR).ln();
    }
    Ok(total / n as f64)
}

pub(crate) fn cross_entropy_grad(probs: &Tensor, labels: &[usize]) -> Tensor {
    let (n, c) = (probs.shape()[0], probs.shape()[1]);
    let mut g = Tensor::zeros(probs.shape());
    for (i, &y) in labels.iter().enumerate() {
        let p = probs.data()[i * c + y];
        if p > PROB_FLOOR {
            g.data_mut()[i * c + y] = -1.0 / (p * n as f64);
        }
    }
    g
}

/// Mean squared logarithmic error: `mean((ln((p + 1) / (a + 1)))^2)`.
pub fn msle_loss(pred: &Tensor, actual: &Tensor) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::shape(format!(
            "prediction has {} entries, target {}",
            pred.len(),
            actual.len()
        )));
    }
    if let Some(v) = pred.data().iter().chain(actual.data()).find(|&&v| !(v > -1.0)) {
        return Err(Error::Domain(format!("MSLE entries must exceed -1, found {v}")));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(actual.data())
        .map(|(p, a)| ((p + 1.0) / (a + 1.0)).ln().powi(2))
        .sum();
    Ok(sum / pred.len() as f64)
}

pub(crate) fn msle_grad(pred: &Tensor, actual: &Tensor) -> Tensor {
    let t = pred.len() as f64;
    let g = pred
        .data()
        .iter()
        .zip(actual.data())
        .map(|(p, a)| 2.0 * ((p + 1.0) / (a + 1.0)).ln() / ((p + 1.0) * t))
        .collect();
    Tensor::new(pred.shape().to_vec(), g).expect("same shape as prediction")
}
