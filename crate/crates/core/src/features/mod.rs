//! Frame-level features: power spectra, the MFCC baseline and the
//! denoising-autoencoder bottleneck features.

mod ddae;
mod mfcc;
mod spectrum;

use serde::{Deserialize, Serialize};

pub use ddae::{
    corrupt, corruption_seed, ddae_encode, ddae_encode_batch, ddae_reconstruct, ddae_train, DdaeConfig, DdaeModel,
    BOTTLENECK, DEFAULT_CORRUPTION, DEFAULT_HIDDEN,
};
pub use mfcc::{
    dct2, hz_to_mel, log_mel_frames, mel_to_hz, mfcc, MelFilterbank, DEFAULT_COEFFS, DEFAULT_MELS, LOG_FLOOR,
    MFCC_FFT, PRE_EMPHASIS,
};
pub use spectrum::{hann, power_spectrum, Spectrum, SpectrumAnalyzer};

use crate::audio::{frame_split, AudioClip, FRAME_LEN, FRAME_OVERLAP};
use crate::Result;

/// FFT size used for autoencoder spectra (513 bins).
pub const DDAE_FFT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Ddae,
    Mfcc,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Ddae => "ddae",
            FeatureKind::Mfcc => "mfcc",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ddae" => Ok(Self::Ddae),
            "mfcc" => Ok(Self::Mfcc),
            _ => Err(crate::Error::arg(format!("unknown feature kind {s:?} (expected ddae or mfcc)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    kind: FeatureKind,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, kind: FeatureKind) -> Self {
        Self { values, kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Power spectra of every frame of the standard framing.
pub fn frame_spectra(clip: &AudioClip, fft_size: usize) -> Result<Vec<Spectrum>> {
    let frames = frame_split(clip, FRAME_LEN, FRAME_OVERLAP)?;
    let analyzer = SpectrumAnalyzer::new(FRAME_LEN, fft_size, clip.sample_rate())?;
    frames.frames().map(|f| analyzer.analyze(f)).collect()
}
