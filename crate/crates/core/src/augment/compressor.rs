//! Feed-forward dynamic range compressor.
//!
//! Level detection is a peak follower with instantaneous attack and an
//! exponential release. The static curve is a soft-knee compressor in the
//! dB domain, and the resulting gain reduction is smoothed with separate
//! attack and release time constants.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::{Error, Result};

const PRESETS_JSON: &str = include_str!("../../data/crd_presets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorPreset {
    pub name: String,
    /// dBFS.
    pub threshold: f64,
    pub ratio: f64,
    /// Milliseconds.
    pub attack: f64,
    /// Milliseconds.
    pub release: f64,
    /// dB.
    pub knee_width: f64,
}

impl CompressorPreset {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio >= 1.0) {
            return Err(Error::arg(format!("ratio {} is below 1", self.ratio)));
        }
        if !(self.attack > 0.0 && self.release > 0.0) {
            return Err(Error::arg("attack and release must be positive"));
        }
        if !(self.knee_width >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::arg("knee width must be non-negative"));
        }
        Ok(())
    }

    /// Output level in dB for a steady input level, ignoring the envelope.
    pub fn static_curve(&self, level_db: f64) -> f64 {
        let over = level_db - self.threshold;
        let w = self.knee_width;
        if 2.0 * over < -w {
            level_db
        } else if w > 0.0 && 2.0 * over.abs() <= w {
            level_db + (1.0 / self.ratio - 1.0) * (over + w / 2.0).powi(2) / (2.0 * w)
        } else {
            self.threshold + over / self.ratio
        }
    }
}

/// The four shipped presets, `preset-1` .. `preset-4`.
pub fn crd_presets() -> &'static [CompressorPreset] {
    static PRESETS: OnceLock<Vec<CompressorPreset>> = OnceLock::new();
    PRESETS.get_or_init(|| serde_json::from_str(PRESETS_JSON).expect("bundled preset table is valid"))
}

fn time_coef(ms: f64, sample_rate: u32) -> f64 {
    (-1.0 / (ms * 1e-3 * f64::from(sample_rate))).exp()
}

/// Compresses the dynamic range of `clip` with `preset`. No makeup gain is
/// applied, so the gain never exceeds unity.
pub fn compress_dynamic_range(clip: &AudioClip, preset: &CompressorPreset) -> Result<AudioClip> {
    preset.validate()?;
    let sr = clip.sample_rate();
    let (att, rel) = (time_coef(preset.attack, sr), time_coef(preset.release, sr));
    let mut env = 0.0f64;
    let mut gain_db = 0.0f64;
    let out = clip
        .samples()
        .iter()
        .map(|&x| {
            env = x.abs().max(env * rel);
            let level = 20.0 * env.max(1e-10).log10();
            let target = (preset.static_curve(level) - level).min(0.0);
            let coef = if target < gain_db { att } else { rel };
            gain_db = coef * gain_db + (1.0 - coef) * target;
            x * 10f64.powf(gain_db / 20.0)
        })
        .collect();
    Ok(AudioClip::from_clamped(out, sr))
}
