//! Manifests, user-level splits, the five binary tasks, feature
//! extraction, classifier training, clip prediction and metrics.

mod classify;
pub mod corpus;
mod extract;
mod manifest;
mod metrics;
mod split;
mod task;
pub mod workflow;

pub use classify::{aggregate_frames, label_clips, predict_clip, train_classifier, ClipPrediction, Classifier, LabeledClip, TrainOutcome};
pub use corpus::{synth_corpus, write_corpus, CorpusSpec};
pub use extract::{clip_spectra, extract_dataset_features, read_clip, to_canonical, ClipFeatures, Extractor, FeatureCache, FeatureConfig};
pub use manifest::{load_manifest, manifest_to_string, parse_manifest, write_manifest, ClassLabel, ManifestEntry, Split};
pub use metrics::{compute_metrics, confusion_counts, Confusion, EvalReport, Metrics, TaskReport};
pub use split::{split_dataset, DatasetSplits};
pub use task::{build_task, builtin_task, builtin_tasks, load_tasks, TaskDataset, TaskSpec, BINARY_LABELS, NEGATIVE, POSITIVE};
