use std::collections::BTreeMap;

use super::metrics::{confusion_counts, Confusion};
use super::task::BINARY_LABELS;
use super::Extractor;
use crate::audio::AudioClip;
use crate::neuralnet::train::{fit, predict_proba, EpochReport};
use crate::neuralnet::{Checkpoint, ModelConfig, Network, Tensor};
use crate::{Error, Result};

/// Frame features of one clip with its binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub frames: Vec<Vec<f64>>,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// 1-based epoch whose parameters were kept; 0 for an untrained model.
    pub best_epoch: usize,
}

/// Per-dimension mean and standard deviation over all frames, rounded to
/// checkpoint precision. Constant dimensions get a deviation of 1.
fn moments(frames: &[&[f64]], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = frames.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for f in frames {
        for (m, v) in mean.iter_mut().zip(*f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for f in frames {
        for ((s, v), m) in var.iter_mut().zip(*f).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let q = |x: f64| f64::from(x as f32);
    let std = var
        .iter()
        .map(|s| {
            let sd = q((s / n).sqrt());
            if sd > 1e-8 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean.into_iter().map(q).collect(), std)
}

fn frame_matrix(clips: &[LabeledClip], dim: usize, mean: &[f64], std: &[f64]) -> Result<(Tensor, Vec<usize>)> {
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for c in clips {
        for f in &c.frames {
            data.extend(standardize(f, dim, mean, std)?);
            labels.push(c.label);
        }
    }
    if labels.is_empty() {
        return Err(Error::arg("no frames to train on"));
    }
    Ok((Tensor::new(vec![labels.len(), dim], data)?, labels))
}

/// Zero-pads `frame` to `dim` and standardizes each dimension.
fn standardize(frame: &[f64], dim: usize, mean: &[f64], std: &[f64]) -> Result<Vec<f64>> {
    if frame.len() > dim {
        return Err(Error::shape(format!(
            "feature vector of width {} does not fit classifier input {dim}",
            frame.len()
        )));
    }
    Ok((0..dim)
        .map(|i| (frame.get(i).copied().unwrap_or(0.0) - mean[i]) / std[i])
        .collect())
}

/// Trains a frame-level classifier. Every frame inherits its clip's label;
/// inputs are zero-padded to the network width and standardized with
/// training-set statistics, which are stored in the checkpoint as
/// `input.mean` and `input.std`.
pub fn train_classifier(
    train: &[LabeledClip],
    val: &[LabeledClip],
    config: ModelConfig,
    mut meta: BTreeMap<String, String>,
    progress: &mut dyn FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::arg(format!(
            "training needs non-empty train and val splits (got {} and {} clips)",
            train.len(),
            val.len()
        )));
    }
    let dim = config.input_dim;
    let padded: Vec<Vec<f64>> = train
        .iter()
        .flat_map(|c| &c.frames)
        .map(|f| standardize(f, dim, &vec![0.0; dim], &vec![1.0; dim]))
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = padded.iter().map(Vec::as_slice).collect();
    let (mean, std) = moments(&refs, dim);
    let (x, y) = frame_matrix(train, dim, &mean, &std)?;
    let (vx, vy) = frame_matrix(val, dim, &mean, &std)?;
    let result = fit(Network::new(config)?, &x, &y, Some((&vx, &vy)), progress)?;
    meta.insert("labels".into(), BINARY_LABELS.join(","));
    meta.insert("best_epoch".into(), result.best_epoch.to_string());
    let mut checkpoint = Checkpoint::from_network(&result.network, result.history, meta);
    checkpoint.set_extra("input.mean", Tensor::vector(mean)?);
    checkpoint.set_extra("input.std", Tensor::vector(std)?);
    Ok(TrainOutcome {
        checkpoint,
        best_epoch: result.best_epoch,
    })
}

/// Clip-level class probabilities and the chosen label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPrediction {
    pub probabilities: Vec<f64>,
    pub class_index: usize,
    pub label: String,
}

/// Mean of per-frame probabilities and its argmax; ties go to the first
/// (lexicographically smallest) label.
pub fn aggregate_frames(frame_probs: &[Vec<f64>]) -> Result<(Vec<f64>, usize)> {
    let first = frame_probs.first().ok_or_else(|| Error::arg("no frame probabilities to aggregate"))?;
    let mut mean = vec![0.0; first.len()];
    for p in frame_probs {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = frame_probs.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let best = crate::neuralnet::train::argmax(&mean);
    Ok((mean, best))
}

/// A checkpoint ready for inference.
#[derive(Debug, Clone)]
pub struct Classifier {
    network: Network,
    mean: Vec<f64>,
    std: Vec<f64>,
    labels: Vec<String>,
    meta: BTreeMap<String, String>,
}

impl Classifier {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let network = ckpt.network()?;
        let dim = network.config().input_dim;
        let extra = |name: &str, default: f64| -> Result<Vec<f64>> {
            match ckpt.tensor(name) {
                Some(t) if t.len() == dim => Ok(t.data().to_vec()),
                Some(t) => Err(Error::Checkpoint(format!("{name} has {} entries, expected {dim}", t.len()))),
                None => Ok(vec![default; dim]),
            }
        };
        let labels: Vec<String> = match ckpt.meta.get("labels") {
            Some(l) => l.split(',').map(str::to_string).collect(),
            None => BINARY_LABELS.iter().map(|s| s.to_string()).collect(),
        };
        if labels.len() != network.config().n_classes {
            return Err(Error::Checkpoint(format!(
                "{} labels for {} classes",
                labels.len(),
                network.config().n_classes
            )));
        }
        Ok(Self {
            mean: extra("input.mean", 0.0)?,
            std: extra("input.std", 1.0)?,
            network,
            labels,
            meta: ckpt.meta.clone(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    /// Probabilities of every frame.
    pub fn frame_probabilities(&self, frames: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let dim = self.network.config().input_dim;
        let data = frames
            .iter()
            .map(|f| standardize(f, dim, &self.mean, &self.std))
            .collect::<Result<Vec<_>>>()?
            .concat();
        let probs = predict_proba(&self.network, &Tensor::new(vec![frames.len(), dim], data)?)?;
        Ok(probs.chunks(self.labels.len()).map(<[f64]>::to_vec).collect())
    }

    pub fn predict_frames(&self, frames: &[Vec<f64>]) -> Result<ClipPrediction> {
        let (probabilities, class_index) = aggregate_frames(&self.frame_probabilities(frames)?)?;
        Ok(ClipPrediction {
            probabilities,
            class_index,
            label: self.labels[class_index].clone(),
        })
    }

    /// Predicted class index of every clip and the resulting confusion
    /// counts against the clip labels.
    pub fn evaluate(&self, clips: &[LabeledClip]) -> Result<(Vec<usize>, Confusion)> {
        let preds = clips
            .iter()
            .map(|c| self.predict_frames(&c.frames).map(|p| p.class_index))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<usize> = clips.iter().map(|c| c.label).collect();
        let counts = confusion_counts(&preds, &labels)?;
        Ok((preds, counts))
    }
}

/// Frames the clip, extracts features and averages the frame predictions.
/// Clips shorter than one frame are zero-padded to a single frame.
pub fn predict_clip(classifier: &Classifier, clip: &AudioClip, extractor: &Extractor<'_>) -> Result<ClipPrediction> {
    classifier.predict_frames(&extractor.clip_features(clip)?)
}

/// Pairs extracted clip features with task labels.
pub fn label_clips(features: Vec<super::ClipFeatures>, labels: &[usize]) -> Vec<LabeledClip> {
    features
        .into_iter()
        .zip(labels)
        .map(|(f, &label)| LabeledClip { frames: f.frames, label })
        .collect()
}
