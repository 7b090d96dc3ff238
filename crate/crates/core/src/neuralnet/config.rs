//! Model configuration, shape inference and the canonical text format.
//!
//! The text format is one `key = value` pair per line; `#` starts a comment.
//! Layers are listed in order with repeated `layer = <kind> k=v ...` lines:
//!
//! ```text
//! input_dim = 256
//! n_classes = 2
//! loss = cross_entropy
//! layer = conv1d channels=10 kernel=12 stride=1 padding=0
//! layer = batchnorm
//! layer = relu
//! layer = maxpool size=2 stride=2
//! layer = flatten
//! layer = dense units=2
//! layer = softmax
//! ```

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ops::output_length;
use super::AdamConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv1d {
        channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    AvgPool {
        size: usize,
        stride: usize,
    },
    BatchNorm,
    Relu,
    Sigmoid,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        units: usize,
    },
    Softmax,
}

/// Per-sample activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    /// `channels x length` sequence.
    Seq { channels: usize, len: usize },
    Flat(usize),
}

impl Shape {
    pub fn numel(self) -> usize {
        match self {
            Shape::Seq { channels, len } => channels * len,
            Shape::Flat(d) => d,
        }
    }

    pub fn dims(self) -> Vec<usize> {
        match self {
            Shape::Seq { channels, len } => vec![channels, len],
            Shape::Flat(d) => vec![d],
        }
    }

    /// Channel count seen by per-channel layers; a flat vector has one
    /// channel per element.
    pub(crate) fn channels_len(self) -> (usize, usize) {
        match self {
            Shape::Seq { channels, len } => (channels, len),
            Shape::Flat(d) => (d, 1),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Seq { channels, len } => write!(f, "[{channels} x {len}]"),
            Shape::Flat(d) => write!(f, "[{d}]"),
        }
    }
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::AvgPool { .. } => "avgpool",
            LayerSpec::BatchNorm => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Softmax => "softmax",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::arg(m));
        match *self {
            LayerSpec::Conv1d {
                channels, kernel, stride, ..
            } if channels == 0 || kernel == 0 || stride == 0 => {
                bad(format!("conv1d needs channels, kernel and stride >= 1, got {self}"))
            }
            LayerSpec::MaxPool { size, stride } | LayerSpec::AvgPool { size, stride } if size == 0 || stride == 0 => {
                bad(format!("pool needs size and stride >= 1, got {self}"))
            }
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => bad(format!("dropout rate {rate} outside [0, 1)")),
            LayerSpec::Dense { units: 0 } => bad("dense layer needs at least one unit".into()),
            _ => Ok(()),
        }
    }

    /// Output shape for `input`, following the output-length rule for
    /// convolution and pooling windows.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        self.validate()?;
        let seq = || match input {
            Shape::Seq { channels, len } => Ok((channels, len)),
            Shape::Flat(_) => Err(Error::shape(format!("{} needs a sequence input, got {input}", self.kind_name()))),
        };
        Ok(match *self {
            LayerSpec::Conv1d {
                channels,
                kernel,
                stride,
                padding,
            } => {
                let (_, len) = seq()?;
                Shape::Seq {
                    channels,
                    len: output_length(len, kernel, padding, stride)?,
                }
            }
            LayerSpec::MaxPool { size, stride } | LayerSpec::AvgPool { size, stride } => {
                let (channels, len) = seq()?;
                Shape::Seq {
                    channels,
                    len: output_length(len, size, 0, stride)?,
                }
            }
            LayerSpec::Flatten => Shape::Flat(input.numel()),
            LayerSpec::Dense { units } => match input {
                Shape::Flat(_) => Shape::Flat(units),
                Shape::Seq { .. } => return Err(Error::shape(format!("dense needs a flat input, got {input}"))),
            },
            LayerSpec::BatchNorm | LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Dropout { .. } | LayerSpec::Softmax => input,
        })
    }

    /// Trainable parameter count for a layer fed with `input`.
    pub fn param_count(&self, input: Shape) -> usize {
        match (*self, input) {
            (LayerSpec::Conv1d { channels, kernel, .. }, Shape::Seq { channels: cin, .. }) => channels * cin * kernel + channels,
            (LayerSpec::BatchNorm, s) => 2 * s.channels_len().0,
            (LayerSpec::Dense { units }, Shape::Flat(d)) => units * d + units,
            _ => 0,
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind_name())?;
        match *self {
            LayerSpec::Conv1d {
                channels,
                kernel,
                stride,
                padding,
            } => write!(f, " channels={channels} kernel={kernel} stride={stride} padding={padding}"),
            LayerSpec::MaxPool { size, stride } | LayerSpec::AvgPool { size, stride } => write!(f, " size={size} stride={stride}"),
            LayerSpec::Dropout { rate } => write!(f, " rate={rate}"),
            LayerSpec::Dense { units } => write!(f, " units={units}"),
            _ => Ok(()),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts.next().ok_or_else(|| Error::arg("empty layer description"))?;
        let mut kv = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("layer option {p:?} is not key=value")))?;
            kv.insert(k, v);
        }
        let num = |key: &str, default: Option<usize>| -> Result<usize> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| Error::arg(format!("{kind}: {key}={v} is not an integer"))),
                None => default.ok_or_else(|| Error::arg(format!("{kind}: missing {key}"))),
            }
        };
        let spec = match kind {
            "conv1d" => LayerSpec::Conv1d {
                channels: num("channels", None)?,
                kernel: num("kernel", None)?,
                stride: num("stride", Some(1))?,
                padding: num("padding", Some(0))?,
            },
            "maxpool" => LayerSpec::MaxPool {
                size: num("size", None)?,
                stride: num("stride", None)?,
            },
            "avgpool" => LayerSpec::AvgPool {
                size: num("size", None)?,
                stride: num("stride", None)?,
            },
            "batchnorm" => LayerSpec::BatchNorm,
            "relu" => LayerSpec::Relu,
            "sigmoid" => LayerSpec::Sigmoid,
            "dropout" => LayerSpec::Dropout {
                rate: kv
                    .get("rate")
                    .ok_or_else(|| Error::arg("dropout: missing rate"))?
                    .parse()
                    .map_err(|_| Error::arg("dropout: rate is not a number"))?,
            },
            "flatten" => LayerSpec::Flatten,
            "dense" => LayerSpec::Dense { units: num("units", None)? },
            "softmax" => LayerSpec::Softmax,
            other => return Err(Error::arg(format!("unknown layer kind {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Msle,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Msle => "msle",
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(LossKind::CrossEntropy),
            "msle" => Ok(LossKind::Msle),
            _ => Err(Error::arg(format!("unknown loss {s:?}"))),
        }
    }
}

/// Full description of a classifier and how to train it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: Vec<LayerSpec>,
    /// Length of the single-channel input vector.
    pub input_dim: usize,
    pub n_classes: usize,
    pub loss: LossKind,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

const PROFILES: [(&str, &str); 3] = [
    ("paper", include_str!("../../data/profiles/paper.cfg")),
    ("paper-5", include_str!("../../data/profiles/paper-5.cfg")),
    ("paper-3", include_str!("../../data/profiles/paper-3.cfg")),
];

/// Names of the shipped model profiles.
pub fn profile_names() -> Vec<&'static str> {
    PROFILES.iter().map(|(n, _)| *n).collect()
}

impl ModelConfig {
    /// Loads a shipped profile by name.
    pub fn profile(name: &str) -> Result<Self> {
        let (_, text) = PROFILES
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::arg(format!("unknown profile {name:?} (available: {})", profile_names().join(", "))))?;
        Self::parse(text)
    }

    pub fn input_shape(&self) -> Shape {
        Shape::Seq {
            channels: 1,
            len: self.input_dim,
        }
    }

    /// Per-layer output shapes. Fails naming the first layer whose input
    /// does not fit, or when the network does not end in a softmax over
    /// `n_classes`.
    pub fn infer_shapes(&self) -> Result<Vec<Shape>> {
        let mut shape = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(shape).map_err(|e| match e {
                Error::Shape(m) | Error::Argument(m) => Error::shape(format!("layer {i} ({layer}): {m}")),
                other => other,
            })?;
            out.push(shape);
        }
        match (self.layers.last(), out.last()) {
            (Some(LayerSpec::Softmax), Some(&Shape::Flat(n))) if n == self.n_classes => Ok(out),
            _ => Err(Error::shape(format!(
                "network must end in a softmax over {} classes",
                self.n_classes
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_classes < 2 {
            return Err(Error::arg("input_dim must be positive and n_classes at least 2"));
        }
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be positive"));
        }
        self.infer_shapes().map(|_| ())
    }

    /// Number of trainable parameters (weights, biases and batch-norm
    /// scale/shift; running statistics excluded).
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.infer_shapes()?;
        let mut input = self.input_shape();
        let mut total = 0;
        for (layer, out) in self.layers.iter().zip(shapes) {
            total += layer.param_count(input);
            input = out;
        }
        Ok(total)
    }

    /// Replaces the kernel size of every convolution.
    pub fn with_kernel_size(mut self, kernel: usize) -> Self {
        for l in &mut self.layers {
            if let LayerSpec::Conv1d { kernel: k, .. } = l {
                *k = kernel;
            }
        }
        self
    }

    /// Same layer sequence with narrow convolutions and hidden dense layers,
    /// small enough for exhaustive finite-difference checks.
    pub fn downsized(mut self, channels: usize, hidden: usize) -> Self {
        let last_dense = self.layers.iter().rposition(|l| matches!(l, LayerSpec::Dense { .. }));
        for (i, l) in self.layers.iter_mut().enumerate() {
            match l {
                LayerSpec::Conv1d { channels: c, .. } => *c = channels,
                LayerSpec::Dense { units } if Some(i) != last_dense => *units = hidden,
                _ => {}
            }
        }
        self
    }

    /// Serializes to the canonical text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let o = &self.optimizer;
        let _ = writeln!(s, "input_dim = {}", self.input_dim);
        let _ = writeln!(s, "n_classes = {}", self.n_classes);
        let _ = writeln!(s, "loss = {}", self.loss.as_str());
        let _ = writeln!(s, "learning_rate = {}", o.learning_rate);
        let _ = writeln!(s, "beta1 = {}", o.beta1);
        let _ = writeln!(s, "beta2 = {}", o.beta2);
        let _ = writeln!(s, "epsilon = {}", o.epsilon);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "seed = {}", self.seed);
        for l in &self.layers {
            let _ = writeln!(s, "layer = {l}");
        }
        s
    }

    /// Parses the text form. Unknown keys are rejected; optimizer and
    /// training keys fall back to their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig {
            layers: Vec::new(),
            input_dim: 256,
            n_classes: 2,
            loss: LossKind::CrossEntropy,
            optimizer: AdamConfig::default(),
            batch_size: 32,
            epochs: 66,
            seed: crate::DEFAULT_SEED,
        };
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::arg(format!("config line {}: expected key = value", no + 1)))?;
            let bad = |what: &str| Error::arg(format!("config line {}: {key} = {value:?} is not {what}", no + 1));
            match key {
                "input_dim" => cfg.input_dim = value.parse().map_err(|_| bad("an integer"))?,
                "n_classes" => cfg.n_classes = value.parse().map_err(|_| bad("an integer"))?,
                "loss" => cfg.loss = value.parse()?,
                "learning_rate" => cfg.optimizer.learning_rate = value.parse().map_err(|_| bad("a number"))?,
                "beta1" => cfg.optimizer.beta1 = value.parse().map_err(|_| bad("a number"))?,
                "beta2" => cfg.optimizer.beta2 = value.parse().map_err(|_| bad("a number"))?,
                "epsilon" => cfg.optimizer.epsilon = value.parse().map_err(|_| bad("a number"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("an integer"))?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("an integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("an integer"))?,
                "layer" => cfg.layers.push(value.parse().map_err(|e: Error| {
                    Error::arg(format!("config line {}: {e}", no + 1))
                })?),
                _ => return Err(Error::arg(format!("config line {}: unknown key {key:?}", no + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(layer: LayerSpec, input: Shape) -> usize {
        layer.param_count(input)
    }

    #[test]
    fn param_count_examples() {
        assert_eq!(single(LayerSpec::Dense { units: 5 }, Shape::Flat(10)), 55);
        let conv = LayerSpec::Conv1d {
            channels: 8,
            kernel: 12,
            stride: 1,
            padding: 0,
        };
        assert_eq!(single(conv, Shape::Seq { channels: 1, len: 256 }), 104);
    }

    #[test]
    fn paper_profile_has_the_published_parameter_count() {
        let cfg = ModelConfig::profile("paper").unwrap();
        assert_eq!(cfg.param_count().unwrap(), 87_624);
        let convs = cfg.layers.iter().filter(|l| matches!(l, LayerSpec::Conv1d { .. })).count();
        assert_eq!(convs, 6);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.epochs, 66);
        let dropouts: Vec<f64> = cfg
            .layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dropout { rate } => Some(*rate),
                _ => None,
            })
            .collect();
        assert_eq!(dropouts, vec![0.5, 0.5]);
    }

    #[test]
    fn depth_profiles_are_valid() {
        for name in profile_names() {
            ModelConfig::profile(name).unwrap();
        }
        let convs = |n: &str| {
            ModelConfig::profile(n)
                .unwrap()
                .layers
                .iter()
                .filter(|l| matches!(l, LayerSpec::Conv1d { .. }))
                .count()
        };
        assert_eq!(convs("paper-3"), 3);
        assert_eq!(convs("paper-5"), 5);
        assert!(ModelConfig::profile("vgg").is_err());
    }

    #[test]
    fn text_round_trip() {
        let cfg = ModelConfig::profile("paper").unwrap();
        let text = cfg.to_text();
        assert_eq!(ModelConfig::parse(&text).unwrap(), cfg);
        assert_eq!(ModelConfig::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let cfg = ModelConfig::profile("paper").unwrap().with_kernel_size(48);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("layer"), "{err}");
        for k in [12, 24, 36] {
            ModelConfig::profile("paper-3").unwrap().with_kernel_size(k).validate().unwrap();
        }
    }

    #[test]
    fn must_end_in_softmax() {
        let mut cfg = ModelConfig::profile("paper").unwrap();
        cfg.layers.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::profile("paper").unwrap();
        cfg.n_classes = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(ModelConfig::parse("layer = conv1d kernel=3").is_err());
        assert!(ModelConfig::parse("bogus = 1").is_err());
        assert!(ModelConfig::parse("layer = dropout rate=1.0").is_err());
        assert!(ModelConfig::parse("input_dim = x").is_err());
    }

    #[test]
    fn downsized_keeps_structure() {
        let cfg = ModelConfig::profile("paper").unwrap().downsized(3, 8);
        cfg.validate().unwrap();
        assert!(cfg.param_count().unwrap() < 2000);
        assert_eq!(cfg.layers.len(), ModelConfig::profile("paper").unwrap().layers.len());
    }
}
