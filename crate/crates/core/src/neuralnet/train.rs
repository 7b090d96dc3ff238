//! Mini-batch training with per-epoch validation and best-epoch retention.

use rand::seq::SliceRandom;

use super::{Mode, Network, Tensor, TrainingHistory};
use crate::{rng, Error, Result};

const SHUFFLE_KEY: u64 = 0x5348_5546;
const EVAL_CHUNK: usize = 512;

/// Summary of one finished epoch, passed to the progress callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    /// Percent of training samples classified correctly during the epoch.
    pub accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Network from the epoch with the best validation accuracy (earliest
    /// on ties), or from the last epoch without validation data.
    pub network: Network,
    pub history: TrainingHistory,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
}

fn gather(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let d = x.len() / x.shape()[0];
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(x.row(i));
    }
    Tensor::new(vec![idx.len(), d], data)
}

/// Argmax class of every row of `x` in eval mode.
pub fn predict_classes(net: &Network, x: &Tensor) -> Result<Vec<usize>> {
    Ok(predict_proba(net, x)?
        .chunks(net.config().n_classes)
        .map(argmax)
        .collect())
}

/// Row-major `[N, n_classes]` probabilities, evaluated in chunks.
pub fn predict_proba(net: &Network, x: &Tensor) -> Result<Vec<f64>> {
    let n = x.shape()[0];
    let mut out = Vec::with_capacity(n * net.config().n_classes);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        out.extend_from_slice(net.forward(&gather(x, &idx)?, Mode::Eval)?.data());
    }
    Ok(out)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
        .0
}

/// Percent of rows whose argmax matches the label.
pub fn accuracy(net: &Network, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let pred = predict_classes(net, x)?;
    let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(100.0 * hits as f64 / labels.len().max(1) as f64)
}

/// Batch boundaries over `n` shuffled samples. A trailing batch of one
/// sample is merged into the previous batch so batch norm always sees at
/// least two.
pub fn batch_ranges(n: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<_> = (0..n).step_by(batch_size.max(1)).map(|s| s..(s + batch_size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").end = last.end;
    }
    out
}

/// Trains `network` for `config.epochs` epochs on `[N, input_dim]` samples.
///
/// Shuffling and dropout masks come from streams keyed by the config seed,
/// the epoch and the batch index, so a run is fully reproducible.
pub fn fit(
    network: Network,
    x: &Tensor,
    labels: &[usize],
    val: Option<(&Tensor, &[usize])>,
    progress: &mut dyn FnMut(&EpochReport),
) -> Result<FitResult> {
    let n = x.shape()[0];
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} samples", labels.len())));
    }
    if n < 2 {
        return Err(Error::EmptyInput("training needs at least two samples".into()));
    }
    let cfg = network.config().clone();
    let mut net = network;
    let mut adam = net.adam_state();
    let mut history = TrainingHistory::default();
    let mut best = (net.clone(), f64::NEG_INFINITY, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(&[cfg.seed, SHUFFLE_KEY, epoch as u64]));
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (b, range) in batch_ranges(n, cfg.batch_size).into_iter().enumerate() {
            let idx = &order[range];
            let xb = gather(x, idx)?;
            let yb: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let key = rng::mix_keys(&[cfg.seed, epoch as u64, b as u64]);
            let probs = net.forward(&xb, Mode::Train { dropout_key: key })?;
            hits += probs
                .data()
                .chunks(cfg.n_classes)
                .zip(&yb)
                .filter(|(p, &y)| argmax(p) == y)
                .count();
            loss_sum += net.train_step(&xb, &yb, key, &mut adam)? * idx.len() as f64;
        }
        let report = EpochReport {
            epoch: epoch + 1,
            loss: loss_sum / n as f64,
            accuracy: 100.0 * hits as f64 / n as f64,
            val_accuracy: val.map(|(vx, vy)| accuracy(&net, vx, vy)).transpose()?,
        };
        history.loss.push(report.loss);
        history.accuracy.push(report.accuracy);
        if let Some(v) = report.val_accuracy {
            history.val_accuracy.push(v);
        }
        let score = report.val_accuracy.unwrap_or(f64::INFINITY);
        if score > best.1 || val.is_none() {
            best = (net.clone(), score, epoch + 1);
        }
        progress(&report);
    }
    Ok(FitResult {
        network: best.0,
        history,
        best_epoch: best.2,
    })
}
