//! The five augmentation sets and their provenance records.
//!
//! | set | transform                  | four parameters            |
//! |-----|----------------------------|----------------------------|
//! | ST  | time stretch rate          | 0.80, 0.94, 1.06, 1.24     |
//! | SP1 | pitch shift, semitones     | -2, -1, 1, 2               |
//! | SP2 | pitch shift, semitones     | -3.5, -2.5, 2.5, 3.5       |
//! | CRD | compressor preset id       | 1, 2, 3, 4                 |
//! | BN  | background mix weight `r`  | uniform on [0.10, 0.50]    |

mod compressor;
mod mix;
mod pitch;
mod scenes;
mod stretch;

pub use compressor::{compress_dynamic_range, crd_presets, CompressorPreset};
pub use mix::mix_background;
pub use pitch::pitch_shift;
pub use scenes::{builtin_scenes, NoiseScene};
pub use stretch::{time_stretch, STRETCH_HOP};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::{rng, Error, Result};

pub const STRETCH_RATES: [f64; 4] = [0.80, 0.94, 1.06, 1.24];
pub const SP1_SEMITONES: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
pub const SP2_SEMITONES: [f64; 4] = [-3.5, -2.5, 2.5, 3.5];
pub const MIX_WEIGHT_RANGE: (f64, f64) = (0.10, 0.50);

/// Outputs produced per input clip by every set.
pub const OUTPUTS_PER_SET: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AugmentationSet {
    ST,
    SP1,
    SP2,
    CRD,
    BN,
}

impl AugmentationSet {
    pub const ALL: [AugmentationSet; 5] = [Self::ST, Self::SP1, Self::SP2, Self::CRD, Self::BN];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ST => "ST",
            Self::SP1 => "SP1",
            Self::SP2 => "SP2",
            Self::CRD => "CRD",
            Self::BN => "BN",
        }
    }

    /// Whether `parameter` lies in this set's declared values or range.
    pub fn accepts(self, parameter: f64) -> bool {
        match self {
            Self::ST => STRETCH_RATES.contains(&parameter),
            Self::SP1 => SP1_SEMITONES.contains(&parameter),
            Self::SP2 => SP2_SEMITONES.contains(&parameter),
            Self::CRD => parameter.fract() == 0.0 && (1.0..=crd_presets().len() as f64).contains(&parameter),
            Self::BN => (MIX_WEIGHT_RANGE.0..=MIX_WEIGHT_RANGE.1).contains(&parameter),
        }
    }
}

impl fmt::Display for AugmentationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentationSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|set| set.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::arg(format!("unknown augmentation set {s:?} (expected ST, SP1, SP2, CRD or BN)")))
    }
}

/// Everything needed to regenerate one augmented output from its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub transform: AugmentationSet,
    /// Stretch rate, semitones, preset id or mix weight depending on the set.
    pub parameter: f64,
    pub source_path: String,
    pub seed: u64,
    pub output_index: usize,
    /// Name of the background scene, BN only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    pub version: String,
}

impl AugmentationRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: Self = serde_json::from_str(text)?;
        if !record.transform.accepts(record.parameter) {
            return Err(Error::arg(format!(
                "parameter {} is not valid for {}",
                record.parameter, record.transform
            )));
        }
        Ok(record)
    }
}

/// Draws the BN mix weight for one output.
pub fn mix_weight(seed: u64, output_index: usize) -> f64 {
    let mut g = rng::stream(&[seed, 0x424e, output_index as u64]);
    g.random_range(MIX_WEIGHT_RANGE.0..=MIX_WEIGHT_RANGE.1)
}

fn apply_one(
    clip: &AudioClip,
    set: AugmentationSet,
    parameter: f64,
    noise: Option<&NoiseScene>,
) -> Result<AudioClip> {
    match set {
        AugmentationSet::ST => time_stretch(clip, parameter),
        AugmentationSet::SP1 | AugmentationSet::SP2 => pitch_shift(clip, parameter),
        AugmentationSet::CRD => {
            let preset = crd_presets()
                .get((parameter as usize).wrapping_sub(1))
                .ok_or_else(|| Error::arg(format!("no compressor preset {parameter}")))?;
            compress_dynamic_range(clip, preset)
        }
        AugmentationSet::BN => {
            let scene = noise.ok_or_else(|| Error::arg("BN requires a background scene"))?;
            mix_background(clip, &scene.clip, parameter)
        }
    }
}

/// Applies one augmentation set to `clip`, producing exactly four outputs.
///
/// BN uses scene `i % noise_bank.len()` for output `i` and draws its mix
/// weight from a stream keyed by `(seed, i)`.
pub fn apply_augmentation_set(
    clip: &AudioClip,
    source_path: &str,
    set: AugmentationSet,
    noise_bank: &[NoiseScene],
    seed: u64,
) -> Result<Vec<(AudioClip, AugmentationRecord)>> {
    if set == AugmentationSet::BN && noise_bank.is_empty() {
        return Err(Error::arg("BN augmentation needs a non-empty noise bank"));
    }
    (0..OUTPUTS_PER_SET)
        .map(|i| {
            let (parameter, noise) = match set {
                AugmentationSet::ST => (STRETCH_RATES[i], None),
                AugmentationSet::SP1 => (SP1_SEMITONES[i], None),
                AugmentationSet::SP2 => (SP2_SEMITONES[i], None),
                AugmentationSet::CRD => ((i + 1) as f64, None),
                AugmentationSet::BN => (mix_weight(seed, i), Some(&noise_bank[i % noise_bank.len()])),
            };
            let out = apply_one(clip, set, parameter, noise)?;
            let record = AugmentationRecord {
                transform: set,
                parameter,
                source_path: source_path.to_string(),
                seed,
                output_index: i,
                noise: noise.map(|n| n.name.clone()),
                version: crate::VERSION.to_string(),
            };
            Ok((out, record))
        })
        .collect()
}

/// Regenerates the output described by `record` from its source clip.
pub fn replay(record: &AugmentationRecord, source: &AudioClip, noise_bank: &[NoiseScene]) -> Result<AudioClip> {
    if !record.transform.accepts(record.parameter) {
        return Err(Error::arg(format!(
            "parameter {} is not valid for {}",
            record.parameter, record.transform
        )));
    }
    let noise = match &record.noise {
        Some(name) => Some(
            noise_bank
                .iter()
                .find(|s| &s.name == name)
                .ok_or_else(|| Error::arg(format!("noise scene {name:?} is not in the bank")))?,
        ),
        None => None,
    };
    apply_one(source, record.transform, record.parameter, noise)
}
