//! Synthetic stand-in corpus: ten classes with distinct spectral and
//! temporal signatures, two recordings per simulated user.

use std::path::Path;

use rand::Rng;

use super::{write_manifest, ClassLabel, ManifestEntry};
use crate::audio::{encode_wav, synth_clip, AudioClip, SynthKind, SynthSpec, CANONICAL_RATE};
use crate::{fsutil, rng, Error, Result};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub per_class: usize,
    pub clips_per_user: usize,
    /// Clip length in seconds.
    pub duration: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            per_class: 100,
            clips_per_user: 2,
            duration: 1.0,
            seed: crate::DEFAULT_SEED,
        }
    }
}

/// Tone frequency that identifies a class.
pub fn class_tone_hz(class: ClassLabel) -> f64 {
    220.0 * 1.25f64.powi(class.index() as i32)
}

/// Renders recording `index` of `class`. Cough classes carry decaying
/// bursts, breath classes band noise, mixed classes both; every class has
/// its own tone. Pitch, level and burst rate vary per recording.
pub fn synth_recording(class: ClassLabel, index: usize, spec: &CorpusSpec) -> Result<AudioClip> {
    let key = [spec.seed, class.index() as u64, index as u64];
    let mut r = rng::stream(&key);
    let seed = rng::mix_keys(&key);
    let tone = class_tone_hz(class) * r.random_range(0.98..1.02);
    let d = spec.duration;
    let sr = CANONICAL_RATE;
    let mut parts: Vec<(SynthSpec, f64)> = vec![(
        SynthSpec::new(
            SynthKind::AmTone {
                carrier_hz: tone,
                modulation_hz: r.random_range(2.0..4.0),
                depth: 0.3,
            },
            d,
            seed,
        ),
        0.5,
    )];
    if class.has_cough() {
        parts.push((
            SynthSpec::new(
                SynthKind::PulseTrain {
                    rate_hz: r.random_range(3.0..5.0),
                    carrier_hz: tone * 2.0,
                    decay_secs: 0.04,
                },
                d,
                seed ^ 1,
            ),
            0.4,
        ));
    }
    if class.has_breath() {
        parts.push((
            SynthSpec::new(
                SynthKind::Noise {
                    low_hz: tone * 1.5,
                    high_hz: (tone * 3.0).min(7000.0),
                },
                d,
                seed ^ 2,
            ),
            0.3,
        ));
    }
    parts.push((SynthSpec::new(SynthKind::Noise { low_hz: 50.0, high_hz: 7900.0 }, d, seed ^ 3), 0.03));
    let n = ((d * f64::from(sr)).round() as usize).max(1);
    let mut mix = vec![0.0; n];
    for (s, gain) in parts {
        let c = synth_clip(&s, sr)?;
        for (m, v) in mix.iter_mut().zip(c.samples()) {
            *m += gain * v;
        }
    }
    let peak = mix.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
    let level = r.random_range(0.4..0.9) / peak;
    AudioClip::new(mix.into_iter().map(|v| v * level).collect(), sr)
}

/// Manifest entries and audio for the whole corpus, class by class.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<(ManifestEntry, AudioClip)>> {
    if spec.per_class == 0 || spec.clips_per_user == 0 || !(spec.duration > 0.0) {
        return Err(Error::arg("corpus needs a positive clip count, clips per user and duration"));
    }
    let mut out = Vec::with_capacity(spec.per_class * ClassLabel::ALL.len());
    for class in ClassLabel::ALL {
        for i in 0..spec.per_class {
            let entry = ManifestEntry {
                path: format!("{class}/{class}_{i:04}.wav"),
                label: class,
                user_id: format!("{class}-user{:04}", i / spec.clips_per_user),
                split: None,
            };
            out.push((entry, synth_recording(class, i, spec)?));
        }
    }
    Ok(out)
}

/// Writes the corpus WAVs under `dir` plus `manifest.jsonl` with paths
/// relative to `dir`.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<Vec<ManifestEntry>> {
    let corpus = synth_corpus(spec)?;
    for class in ClassLabel::ALL {
        let sub = dir.join(class.as_str());
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    for (e, clip) in &corpus {
        fsutil::write_atomic(&dir.join(&e.path), &encode_wav(clip))?;
    }
    let entries: Vec<ManifestEntry> = corpus.into_iter().map(|(e, _)| e).collect();
    write_manifest(&dir.join(MANIFEST_NAME), &entries)?;
    Ok(entries)
}
