use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ManifestEntry;
use crate::audio::{decode_wav, resample, AudioClip, CANONICAL_RATE};
use crate::features::{ddae_encode_batch, frame_spectra, mfcc, DdaeModel, FeatureKind, Spectrum, DDAE_FFT};
use crate::{fsutil, Error, Result};

const CACHE_MAGIC: &[u8; 8] = b"RSPRFEAT";

/// Which features to extract and their settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub n_mels: usize,
    pub n_coeffs: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Ddae,
            n_mels: crate::features::DEFAULT_MELS,
            n_coeffs: crate::features::DEFAULT_COEFFS,
        }
    }
}

pub(crate) fn hex_digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Converts any clip to the canonical 16 kHz rate.
pub fn to_canonical(clip: AudioClip) -> Result<AudioClip> {
    if clip.sample_rate() == CANONICAL_RATE {
        Ok(clip)
    } else {
        resample(&clip, CANONICAL_RATE)
    }
}

/// Power spectra of every frame, after resampling to 16 kHz.
pub fn clip_spectra(clip: &AudioClip) -> Result<Vec<Spectrum>> {
    frame_spectra(&to_canonical(clip.clone())?, DDAE_FFT)
}

/// Turns clips into per-frame feature vectors.
pub struct Extractor<'a> {
    config: FeatureConfig,
    ddae: Option<&'a DdaeModel>,
    tag: String,
}

impl<'a> Extractor<'a> {
    /// Autoencoder features need a trained model.
    pub fn new(config: FeatureConfig, ddae: Option<&'a DdaeModel>) -> Result<Self> {
        let tag = match (config.kind, ddae) {
            (FeatureKind::Ddae, None) => {
                return Err(Error::arg("ddae features need a trained autoencoder"));
            }
            (FeatureKind::Ddae, Some(m)) => format!("ddae:{}", hex_digest(&[&m.to_container().to_bytes()])),
            (FeatureKind::Mfcc, _) => {
                if config.n_coeffs == 0 || config.n_coeffs > config.n_mels {
                    return Err(Error::arg(format!(
                        "cannot keep {} coefficients from {} mel filters",
                        config.n_coeffs, config.n_mels
                    )));
                }
                format!("mfcc:{}:{}", config.n_mels, config.n_coeffs)
            }
        };
        Ok(Self {
            config,
            ddae: ddae.filter(|_| config.kind == FeatureKind::Ddae),
            tag,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Identifies the feature settings (and autoencoder weights) in cache
    /// keys and checkpoint metadata.
    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Feature width: 256 for autoencoder features, `n_coeffs` for MFCC.
    pub fn dim(&self) -> usize {
        match self.config.kind {
            FeatureKind::Ddae => crate::features::BOTTLENECK,
            FeatureKind::Mfcc => self.config.n_coeffs,
        }
    }

    /// One vector per frame of the 1024-sample, 50% overlap framing.
    pub fn clip_features(&self, clip: &AudioClip) -> Result<Vec<Vec<f64>>> {
        let clip = to_canonical(clip.clone())?;
        match (self.config.kind, self.ddae) {
            (FeatureKind::Ddae, Some(m)) => {
                let spectra = frame_spectra(&clip, m.fft_size())?;
                Ok(ddae_encode_batch(m, &spectra)?.into_iter().map(|f| f.into_values()).collect())
            }
            (FeatureKind::Ddae, None) => Err(Error::arg("ddae features need a trained autoencoder")),
            (FeatureKind::Mfcc, _) => Ok(mfcc(&clip, self.config.n_mels, self.config.n_coeffs)?
                .into_iter()
                .map(|f| f.into_values())
                .collect()),
        }
    }
}

/// Frame features of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeatures {
    pub frames: Vec<Vec<f64>>,
    /// Whether the values came from the cache.
    pub cache_hit: bool,
}

/// On-disk feature store keyed by audio content and feature settings.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    fn path(&self, audio: &[u8], tag: &str) -> PathBuf {
        self.dir.join(format!("{}.feat", hex_digest(&[audio, tag.as_bytes()])))
    }

    fn get(&self, audio: &[u8], tag: &str) -> Option<Vec<Vec<f64>>> {
        let bytes = std::fs::read(self.path(audio, tag)).ok()?;
        let body = bytes.strip_prefix(CACHE_MAGIC.as_slice())?;
        if body.len() < 16 {
            return None;
        }
        let n = u64::from_le_bytes(body[..8].try_into().ok()?) as usize;
        let d = u64::from_le_bytes(body[8..16].try_into().ok()?) as usize;
        let data = &body[16..];
        if n.checked_mul(d)?.checked_mul(8)? != data.len() || d == 0 {
            return None;
        }
        let vals: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Some(vals.chunks(d).map(<[f64]>::to_vec).collect())
    }

    fn put(&self, audio: &[u8], tag: &str, frames: &[Vec<f64>]) -> Result<()> {
        let d = frames.first().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(24 + frames.len() * d * 8);
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&(frames.len() as u64).to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        for v in frames.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        fsutil::write_atomic(&self.path(audio, tag), &out)
    }
}

/// Decodes WAV bytes, naming `path` in any format error.
pub(crate) fn decode_at(path: &Path, bytes: &[u8]) -> Result<AudioClip> {
    decode_wav(bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        Error::UnsupportedFormat(m) => Error::UnsupportedFormat(format!("{}: {m}", path.display())),
        Error::EmptyInput(m) => Error::EmptyInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_clip(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_at(path, &bytes)
}

/// Features of every entry in order. With a cache, a hit skips decoding
/// and extraction entirely; misses are computed and stored.
pub fn extract_dataset_features(
    entries: &[ManifestEntry],
    base: &Path,
    extractor: &Extractor<'_>,
    cache: Option<&FeatureCache>,
) -> Result<Vec<ClipFeatures>> {
    entries
        .iter()
        .map(|e| {
            let path = e.resolve(base);
            let bytes = std::fs::read(&path).map_err(|err| Error::io(&path, err))?;
            if let Some(frames) = cache.and_then(|c| c.get(&bytes, extractor.tag())) {
                return Ok(ClipFeatures { frames, cache_hit: true });
            }
            let frames = extractor.clip_features(&decode_at(&path, &bytes)?)?;
            if let Some(c) = cache {
                c.put(&bytes, extractor.tag(), &frames)?;
            }
            Ok(ClipFeatures {
                frames,
                cache_hit: false,
            })
        })
        .collect()
}
