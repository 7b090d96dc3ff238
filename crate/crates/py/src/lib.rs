//! Python bindings: WAV input, features, the shipped model profiles,
//! metrics, classifier checkpoints and the command line.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use respira_core::audio::{read_wav as core_read_wav, AudioClip};
use respira_core::features::{mfcc as core_mfcc, DdaeModel, FeatureKind};
use respira_core::neuralnet::{output_length as core_output_length, Checkpoint, ModelConfig};
use respira_core::pipeline::workflow::recorded_feature_kind;
use respira_core::pipeline::{compute_metrics, predict_clip, Classifier as CoreClassifier, Extractor, FeatureConfig};
use respira_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Reads a 16-bit PCM WAV file as (samples, sample_rate).
#[pyfunction]
fn read_wav(path: PathBuf) -> PyResult<(Vec<f64>, u32)> {
    let clip = core_read_wav(path).map_err(to_py)?;
    let rate = clip.sample_rate();
    Ok((clip.into_samples(), rate))
}

/// MFCC vectors, one per 1024-sample frame with 50% overlap.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate, n_mels = 40, n_coeffs = 13))]
fn mfcc(samples: Vec<f64>, sample_rate: u32, n_mels: usize, n_coeffs: usize) -> PyResult<Vec<Vec<f64>>> {
    let clip = AudioClip::new(samples, sample_rate).map_err(to_py)?;
    let clip = respira_core::pipeline::to_canonical(clip).map_err(to_py)?;
    Ok(core_mfcc(&clip, n_mels, n_coeffs)
        .map_err(to_py)?
        .into_iter()
        .map(|f| f.into_values())
        .collect())
}

/// Output length of a convolution or pooling window.
#[pyfunction]
#[pyo3(signature = (input_len, kernel, padding = 0, stride = 1))]
fn output_length(input_len: usize, kernel: usize, padding: usize, stride: usize) -> PyResult<usize> {
    core_output_length(input_len, kernel, padding, stride).map_err(to_py)
}

/// Trainable parameter count of a shipped profile.
#[pyfunction]
fn param_count(profile: &str) -> PyResult<usize> {
    ModelConfig::profile(profile)
        .and_then(|c| c.param_count())
        .map_err(to_py)
}

/// Accuracy, precision, recall and F1 from confusion counts.
#[pyfunction]
fn metrics(pt: u64, pf: u64, nt: u64, nf: u64) -> PyResult<BTreeMap<&'static str, f64>> {
    let m = compute_metrics(pt, pf, nt, nf).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("accuracy", m.accuracy),
        ("precision", m.precision),
        ("recall", m.recall),
        ("f1", m.f1),
    ]))
}

/// Runs the `respira` command line with `args` and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    respira_core::cli::run(std::iter::once("respira".to_string()).chain(args))
}

/// A trained clip classifier.
#[pyclass(module = "respira")]
struct Classifier {
    inner: CoreClassifier,
    ddae: Option<DdaeModel>,
}

#[pymethods]
impl Classifier {
    /// Loads a classifier checkpoint, plus the autoencoder checkpoint when
    /// it was trained on autoencoder features.
    #[new]
    #[pyo3(signature = (checkpoint, ddae = None))]
    fn new(checkpoint: PathBuf, ddae: Option<PathBuf>) -> PyResult<Self> {
        let inner = Checkpoint::load(&checkpoint)
            .and_then(|c| CoreClassifier::from_checkpoint(&c))
            .map_err(to_py)?;
        let ddae = match (recorded_feature_kind(&inner), ddae) {
            (Some(FeatureKind::Ddae), Some(p)) => Some(DdaeModel::load(&p).map_err(to_py)?),
            (Some(FeatureKind::Ddae), None) => {
                return Err(PyValueError::new_err("this classifier needs its ddae checkpoint"));
            }
            _ => None,
        };
        Ok(Self { inner, ddae })
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    /// Predicted label and class probabilities for a WAV file.
    fn predict(&self, path: PathBuf) -> PyResult<(String, Vec<f64>)> {
        let meta = self.inner.meta();
        let num = |k: &str, d: usize| meta.get(k).and_then(|v| v.parse().ok()).unwrap_or(d);
        let config = FeatureConfig {
            kind: recorded_feature_kind(&self.inner).unwrap_or(FeatureKind::Mfcc),
            n_mels: num("n_mels", respira_core::features::DEFAULT_MELS),
            n_coeffs: num("n_coeffs", respira_core::features::DEFAULT_COEFFS),
        };
        let extractor = Extractor::new(config, self.ddae.as_ref()).map_err(to_py)?;
        let clip = core_read_wav(path).map_err(to_py)?;
        let p = predict_clip(&self.inner, &clip, &extractor).map_err(to_py)?;
        Ok((p.label, p.probabilities))
    }
}

#[pymodule]
fn respira(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", respira_core::VERSION)?;
    m.add("DEFAULT_SEED", respira_core::DEFAULT_SEED)?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(mfcc, m)?)?;
    m.add_function(wrap_pyfunction!(output_length, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Classifier>()?;
    Ok(())
}
