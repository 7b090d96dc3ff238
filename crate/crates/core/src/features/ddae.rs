//! Denoising autoencoder over log-compressed power spectra. The 256-wide
//! bottleneck activation is the deep feature fed to the classifier.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureVector, Spectrum};
use crate::neuralnet::{adam_step, AdamConfig, AdamState, Container, LayerSpec, Mode, Sequential, Shape, Tensor};
use crate::{rng, Error, Result};

pub const BOTTLENECK: usize = 256;
pub const DEFAULT_HIDDEN: usize = 384;
pub const DEFAULT_CORRUPTION: f64 = 0.2;
const SHUFFLE_KEY: u64 = 0x4444_5348;
const CORRUPT_KEY: u64 = 0x4d41_534b;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdaeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub corruption_level: f64,
    pub seed: u64,
}

impl Default for DdaeConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            corruption_level: DEFAULT_CORRUPTION,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl DdaeConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.corruption_level) {
            return Err(Error::arg(format!("corruption level {} outside [0, 1]", self.corruption_level)));
        }
        if self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::arg("hidden width and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::arg("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Zeroes each value independently with probability `level`.
fn mask_values(values: &mut [f64], level: f64, key: u64) {
    if level <= 0.0 {
        return;
    }
    let mut r = rng::stream(&[key, CORRUPT_KEY]);
    for v in values {
        if r.random::<f64>() < level {
            *v = 0.0;
        }
    }
}

/// Masking noise: every bin is zeroed with probability `level`.
pub fn corrupt(spectrum: &Spectrum, level: f64, seed: u64) -> Result<Spectrum> {
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::arg(format!("corruption level {level} outside [0, 1]")));
    }
    let mut bins = spectrum.bins().to_vec();
    mask_values(&mut bins, level, seed);
    Spectrum::new(bins, spectrum.fft_size(), spectrum.sample_rate())
}

/// Seed of the corruption mask applied to sample `index` in `epoch`.
pub fn corruption_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    rng::mix_keys(&[seed, epoch as u64, index as u64])
}

/// Encoder, decoder and the input normalization they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct DdaeModel {
    config: DdaeConfig,
    fft_size: usize,
    sample_rate: u32,
    log_min: f64,
    log_max: f64,
    encoder: Sequential,
    decoder: Sequential,
    history: Vec<f64>,
}

/// Power measured in squared 16-bit sample units, where quiet bins sit well
/// above 1 and `ln(1 + p)` acts as a true log compression.
const PCM_POWER_SCALE: f64 = 32768.0 * 32768.0;

fn compress(power: f64) -> f64 {
    (power * PCM_POWER_SCALE).ln_1p()
}

fn encoder_layers(hidden: usize) -> [LayerSpec; 3] {
    [LayerSpec::Dense { units: hidden }, LayerSpec::Relu, LayerSpec::Dense { units: BOTTLENECK }]
}

fn decoder_layers(hidden: usize, width: usize) -> [LayerSpec; 4] {
    [
        LayerSpec::Dense { units: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { units: width },
        LayerSpec::Sigmoid,
    ]
}

fn check_uniform(spectra: &[Spectrum]) -> Result<(usize, u32)> {
    let first = spectra.first().ok_or_else(|| Error::arg("no spectra to train on"))?;
    if spectra.iter().any(|s| s.fft_size() != first.fft_size()) {
        return Err(Error::arg("spectra have mixed FFT sizes"));
    }
    Ok((first.fft_size(), first.sample_rate()))
}

impl DdaeModel {
    /// A freshly initialized model whose normalization range is taken
    /// from `spectra`.
    pub fn untrained(spectra: &[Spectrum], config: DdaeConfig) -> Result<Self> {
        config.validate()?;
        let (fft_size, sample_rate) = check_uniform(spectra)?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for b in spectra.iter().flat_map(|s| s.bins()) {
            let l = compress(*b);
            lo = lo.min(l);
            hi = hi.max(l);
        }
        Self::build(config, fft_size, sample_rate, lo, hi)
    }

    fn build(config: DdaeConfig, fft_size: usize, sample_rate: u32, log_min: f64, log_max: f64) -> Result<Self> {
        let width = fft_size / 2 + 1;
        Ok(Self {
            encoder: Sequential::new(&encoder_layers(config.hidden), Shape::Flat(width), config.seed)?,
            decoder: Sequential::new(
                &decoder_layers(config.hidden, width),
                Shape::Flat(BOTTLENECK),
                rng::mix_keys(&[config.seed, 1]),
            )?,
            config,
            fft_size,
            sample_rate,
            log_min,
            log_max,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &DdaeConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Per-epoch mean reconstruction loss; entry 0 is the untrained model.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn encoder(&self) -> &Sequential {
        &self.encoder
    }

    pub fn decoder(&self) -> &Sequential {
        &self.decoder
    }

    fn span(&self) -> f64 {
        let s = self.log_max - self.log_min;
        if s > 1e-12 {
            s
        } else {
            1.0
        }
    }

    fn check_width(&self, s: &Spectrum) -> Result<()> {
        if s.bins().len() != self.input_dim() {
            return Err(Error::arg(format!(
                "spectrum has {} bins, model expects {}",
                s.bins().len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `(ln(1 + p) - min) / (max - min)` per bin.
    pub fn normalize(&self, s: &Spectrum) -> Result<Vec<f64>> {
        self.check_width(s)?;
        let span = self.span();
        Ok(s.bins().iter().map(|b| (compress(*b) - self.log_min) / span).collect())
    }

    pub fn denormalize(&self, v: &[f64]) -> Vec<f64> {
        let span = self.span();
        v.iter().map(|x| (x * span + self.log_min).exp_m1().max(0.0) / PCM_POWER_SCALE).collect()
    }

    fn rows(&self, rows: &[Vec<f64>]) -> Result<Tensor> {
        let d = rows.first().map_or(self.input_dim(), Vec::len);
        Tensor::new(vec![rows.len(), d], rows.concat())
    }

    /// Bottleneck activations for normalized inputs, one row per input.
    pub fn encode_normalized(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let z = self.encoder.forward(&self.rows(rows)?)?;
        Ok(z.data().chunks(BOTTLENECK).map(<[f64]>::to_vec).collect())
    }

    /// Decoder(encoder(x)) in the normalized domain.
    pub fn reconstruct_normalized(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        let z = self.encoder.forward(&self.rows(rows)?)?;
        let y = self.decoder.forward(&z)?;
        Ok(y.data().chunks(self.input_dim()).map(<[f64]>::to_vec).collect())
    }

    /// Mean squared reconstruction error over normalized rows, with the
    /// corruption masks of `epoch` applied to the inputs.
    pub fn corrupted_loss(&self, clean: &[Vec<f64>], epoch: usize) -> Result<f64> {
        let noisy: Vec<Vec<f64>> = clean
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                mask_values(&mut r, self.config.corruption_level, corruption_seed(self.config.seed, epoch, i));
                r
            })
            .collect();
        let out = self.reconstruct_normalized(&noisy)?;
        Ok(mse_rows(&out, clean))
    }

    fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (prefix, seq) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            out.extend(seq.named_tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        out
    }

    pub fn to_container(&self) -> Container {
        let c = &self.config;
        let mut text = String::new();
        let _ = writeln!(text, "fft_size = {}", self.fft_size);
        let _ = writeln!(text, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(text, "hidden = {}", c.hidden);
        let _ = writeln!(text, "bottleneck = {BOTTLENECK}");
        let _ = writeln!(text, "epochs = {}", c.epochs);
        let _ = writeln!(text, "batch_size = {}", c.batch_size);
        let _ = writeln!(text, "learning_rate = {}", c.learning_rate);
        let _ = writeln!(text, "corruption_level = {}", c.corruption_level);
        let _ = writeln!(text, "seed = {}", c.seed);
        let _ = writeln!(text, "log_min = {}", self.log_min);
        let _ = writeln!(text, "log_max = {}", self.log_max);
        let hist: Vec<String> = self.history.iter().map(f64::to_string).collect();
        let _ = writeln!(text, "history.loss = {}", hist.join(","));
        Container {
            kind: "ddae".into(),
            text,
            tensors: self.named_tensors(),
        }
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind != "ddae" {
            return Err(Error::Checkpoint(format!("expected a ddae checkpoint, found {:?}", c.kind)));
        }
        let mut kv = std::collections::BTreeMap::new();
        for line in c.text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim(), v.trim());
            }
        }
        fn get<T: std::str::FromStr>(kv: &std::collections::BTreeMap<&str, &str>, k: &str) -> Result<T> {
            kv.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Checkpoint(format!("ddae checkpoint: missing or bad {k}")))
        }
        if get::<usize>(&kv, "bottleneck")? != BOTTLENECK {
            return Err(Error::Checkpoint("ddae bottleneck must be 256".into()));
        }
        let config = DdaeConfig {
            hidden: get(&kv, "hidden")?,
            epochs: get(&kv, "epochs")?,
            batch_size: get(&kv, "batch_size")?,
            learning_rate: get(&kv, "learning_rate")?,
            corruption_level: get(&kv, "corruption_level")?,
            seed: get(&kv, "seed")?,
        };
        let mut model = Self::build(
            config,
            get(&kv, "fft_size")?,
            get(&kv, "sample_rate")?,
            get(&kv, "log_min")?,
            get(&kv, "log_max")?,
        )?;
        let strip = |prefix: &str| -> Vec<(String, Tensor)> {
            c.tensors
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t.clone())))
                .collect()
        };
        model.encoder.load_named(&strip("encoder."))?;
        model.decoder.load_named(&strip("decoder."))?;
        if let Some(h) = kv.get("history.loss").filter(|h| !h.is_empty()) {
            model.history = h
                .split(',')
                .map(|x| x.parse().map_err(|_| Error::Checkpoint("bad ddae history".into())))
                .collect::<Result<_>>()?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

fn mse_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n: usize = a.iter().map(Vec::len).sum();
    let s: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)))
        .sum();
    s / n.max(1) as f64
}

/// Trains the autoencoder to reconstruct clean spectra from masked ones.
///
/// The history holds the untrained model's loss followed by the mean
/// pre-update batch loss of every epoch. Masks, shuffling and weights all
/// derive from `config.seed`.
pub fn ddae_train(spectra: &[Spectrum], config: DdaeConfig, progress: &mut dyn FnMut(usize, f64)) -> Result<DdaeModel> {
    let mut model = DdaeModel::untrained(spectra, config)?;
    let clean: Vec<Vec<f64>> = spectra.iter().map(|s| model.normalize(s)).collect::<Result<_>>()?;
    let width = model.input_dim();
    let n = clean.len();
    model.history.push(model.corrupted_loss(&clean, 0)?);
    progress(0, model.history[0]);
    let adam_cfg = AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(model.encoder.params().chain(model.decoder.params()));
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(&[config.seed, SHUFFLE_KEY, epoch as u64]));
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut noisy = Vec::with_capacity(chunk.len() * width);
            let mut target = Vec::with_capacity(chunk.len() * width);
            for &i in chunk {
                let mut row = clean[i].clone();
                mask_values(&mut row, config.corruption_level, corruption_seed(config.seed, epoch, i));
                noisy.extend(row);
                target.extend_from_slice(&clean[i]);
            }
            let x = Tensor::new(vec![chunk.len(), width], noisy)?;
            let enc = model.encoder.forward_trace(&x, Mode::Eval)?;
            let dec = model.decoder.forward_trace(enc.output(), Mode::Eval)?;
            let y = dec.output().data();
            let count = y.len() as f64;
            let mut loss = 0.0;
            let grad: Vec<f64> = y
                .iter()
                .zip(&target)
                .map(|(p, t)| {
                    loss += (p - t).powi(2);
                    2.0 * (p - t) / count
                })
                .collect();
            loss /= count;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite autoencoder loss in epoch {epoch}")));
            }
            total += loss * chunk.len() as f64;
            let gy = Tensor::new(dec.output().shape().to_vec(), grad)?;
            let (dec_grads, gz) = model.decoder.backward_with_input(&dec, &gy)?;
            let enc_grads = model.encoder.backward(&enc, &gz)?;
            let grads: Vec<Tensor> = enc_grads.into_iter().chain(dec_grads).collect();
            let mut params = model.encoder.params_mut();
            params.extend(model.decoder.params_mut());
            adam_step(&mut params, &grads, &mut adam, &adam_cfg)?;
            model.encoder.quantize();
            model.decoder.quantize();
        }
        let mean = total / n as f64;
        model.history.push(mean);
        progress(epoch, mean);
    }
    Ok(model)
}

/// The 256-dim bottleneck feature of one spectrum.
pub fn ddae_encode(model: &DdaeModel, spectrum: &Spectrum) -> Result<FeatureVector> {
    let row = model.normalize(spectrum)?;
    let z = model.encode_normalized(&[row])?.remove(0);
    Ok(FeatureVector::new(z, FeatureKind::Ddae))
}

/// Bottleneck features for many spectra in one batched pass.
pub fn ddae_encode_batch(model: &DdaeModel, spectra: &[Spectrum]) -> Result<Vec<FeatureVector>> {
    let rows: Vec<Vec<f64>> = spectra.iter().map(|s| model.normalize(s)).collect::<Result<_>>()?;
    Ok(model
        .encode_normalized(&rows)?
        .into_iter()
        .map(|z| FeatureVector::new(z, FeatureKind::Ddae))
        .collect())
}

/// Denoised power spectrum.
pub fn ddae_reconstruct(model: &DdaeModel, spectrum: &Spectrum) -> Result<Spectrum> {
    let row = model.normalize(spectrum)?;
    let y = model.reconstruct_normalized(&[row])?.remove(0);
    Spectrum::new(model.denormalize(&y), model.fft_size, model.sample_rate)
}
