//! Multi-step routines shared by the command line and the tests: task
//! splits, autoencoder training data, labelled features and evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;

use super::classify::{Classifier, LabeledClip};
use super::extract::{clip_spectra, read_clip, to_canonical, ClipFeatures, Extractor, FeatureCache};
use super::metrics::{compute_metrics, TaskReport};
use super::{build_task, extract_dataset_features, split_dataset, ManifestEntry, TaskSpec};
use crate::augment::{apply_augmentation_set, builtin_scenes, AugmentationSet, NoiseScene};
use crate::audio::CANONICAL_RATE;
use crate::features::{FeatureKind, Spectrum};
use crate::{rng, Error, Result};

/// One task's recordings, split by user, with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplits {
    pub task: TaskSpec,
    pub train: Vec<ManifestEntry>,
    pub train_labels: Vec<usize>,
    pub val: Vec<ManifestEntry>,
    pub val_labels: Vec<usize>,
    pub test: Vec<ManifestEntry>,
    pub test_labels: Vec<usize>,
}

/// Splits the whole manifest by user first, so every task sees the same
/// user assignment, then keeps each split's recordings that the task uses.
pub fn task_splits(entries: &[ManifestEntry], task: &TaskSpec, ratios: (f64, f64, f64), seed: u64) -> Result<TaskSplits> {
    build_task(entries, task)?;
    let splits = split_dataset(entries, ratios, seed)?;
    let pick = |part: &[ManifestEntry]| -> (Vec<ManifestEntry>, Vec<usize>) {
        part.iter()
            .filter_map(|e| task.label_of(e.label).map(|l| (e.clone(), l)))
            .unzip()
    };
    let (train, train_labels) = pick(&splits.train);
    let (val, val_labels) = pick(&splits.val);
    let (test, test_labels) = pick(&splits.test);
    Ok(TaskSplits {
        task: task.clone(),
        train,
        train_labels,
        val,
        val_labels,
        test,
        test_labels,
    })
}

/// Frame spectra of the given recordings, at most `max` of them chosen
/// with `seed` when there are more.
pub fn collect_spectra(entries: &[ManifestEntry], base: &Path, max: usize, seed: u64) -> Result<Vec<Spectrum>> {
    let mut all = Vec::new();
    for e in entries {
        all.extend(clip_spectra(&read_clip(&e.resolve(base))?)?);
    }
    if all.is_empty() {
        return Err(Error::EmptyInput("no recordings to take spectra from".into()));
    }
    if all.len() <= max {
        return Ok(all);
    }
    let mut idx = sample(&mut rng::stream(&[seed, 0x5350_4543]), all.len(), max).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| all[i].clone()).collect())
}

pub fn labeled_features(
    entries: &[ManifestEntry],
    labels: &[usize],
    base: &Path,
    extractor: &Extractor<'_>,
    cache: Option<&FeatureCache>,
) -> Result<Vec<LabeledClip>> {
    let feats: Vec<ClipFeatures> = extract_dataset_features(entries, base, extractor, cache)?;
    Ok(super::classify::label_clips(feats, labels))
}

/// Built-in background scenes used when no noise recordings are supplied.
/// Their content is fixed, so records that name them replay anywhere.
pub fn default_noise_bank() -> Vec<NoiseScene> {
    builtin_scenes(CANONICAL_RATE, 4.0, crate::DEFAULT_SEED)
}

/// Features of augmented copies of the given recordings (four per set per
/// recording), labelled like their sources. BN draws on
/// [`default_noise_bank`].
pub fn augmented_features(
    entries: &[ManifestEntry],
    labels: &[usize],
    base: &Path,
    extractor: &Extractor<'_>,
    sets: &[AugmentationSet],
    seed: u64,
) -> Result<Vec<LabeledClip>> {
    if sets.is_empty() {
        return Ok(Vec::new());
    }
    let bank = default_noise_bank();
    let mut out = Vec::new();
    for (i, (e, &label)) in entries.iter().zip(labels).enumerate() {
        let clip = to_canonical(read_clip(&e.resolve(base))?)?;
        for &set in sets {
            let clip_seed = rng::mix_keys(&[seed, i as u64, rng::str_key(set.as_str())]);
            for (aug, _) in apply_augmentation_set(&clip, &e.path, set, &bank, clip_seed)? {
                out.push(LabeledClip {
                    frames: extractor.clip_features(&aug)?,
                    label,
                });
            }
        }
    }
    Ok(out)
}

/// Checkpoint metadata describing the features a classifier was trained on.
pub fn feature_meta(extractor: &Extractor<'_>, task: &TaskSpec) -> BTreeMap<String, String> {
    let c = extractor.config();
    BTreeMap::from([
        ("features".to_string(), c.kind.as_str().to_string()),
        ("feature_tag".to_string(), extractor.tag().to_string()),
        ("n_mels".to_string(), c.n_mels.to_string()),
        ("n_coeffs".to_string(), c.n_coeffs.to_string()),
        ("task_id".to_string(), task.task_id.to_string()),
        ("task_name".to_string(), task.name.clone()),
    ])
}

/// Fails when the classifier was trained on different features than
/// `extractor` produces.
pub fn check_feature_match(classifier: &Classifier, extractor: &Extractor<'_>) -> Result<()> {
    match classifier.meta().get("feature_tag") {
        Some(tag) if tag != extractor.tag() => Err(Error::Checkpoint(format!(
            "classifier was trained on {} features ({tag}), not {}",
            classifier.meta().get("features").map_or("other", String::as_str),
            extractor.tag()
        ))),
        _ => Ok(()),
    }
}

/// Feature kind recorded in a classifier's metadata.
pub fn recorded_feature_kind(classifier: &Classifier) -> Option<FeatureKind> {
    classifier.meta().get("features").and_then(|k| k.parse().ok())
}

/// Clip-level metrics of `classifier` on labelled clips.
pub fn evaluate_task(classifier: &Classifier, clips: &[LabeledClip], task: &TaskSpec, features: FeatureKind) -> Result<TaskReport> {
    if clips.is_empty() {
        return Err(Error::EmptyInput(format!("task {}: no clips to evaluate", task.task_id)));
    }
    let (_, c) = classifier.evaluate(clips)?;
    Ok(TaskReport {
        task_id: task.task_id,
        task_name: task.name.clone(),
        features: features.as_str().to_string(),
        clips: clips.len(),
        metrics: compute_metrics(c.pt, c.pf, c.nt, c.nf)?,
    })
}
