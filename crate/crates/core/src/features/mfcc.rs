use super::{FeatureKind, FeatureVector, SpectrumAnalyzer};
use crate::audio::{frame_split, AudioClip, CANONICAL_RATE, FRAME_LEN, FRAME_OVERLAP};
use crate::{Error, Result};

pub const PRE_EMPHASIS: f64 = 0.97;
pub const LOG_FLOOR: f64 = 1e-10;
pub const DEFAULT_MELS: usize = 40;
pub const DEFAULT_COEFFS: usize = 13;
pub const MFCC_FFT: usize = 1024;
const MEL_FMAX: f64 = 8000.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale between 0 Hz and
/// 8 kHz, each with unit peak response.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_mels x n_bins`, row-major.
    weights: Vec<f64>,
    n_bins: usize,
    centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32) -> Result<Self> {
        if n_mels == 0 {
            return Err(Error::arg("need at least one mel filter"));
        }
        let n_bins = fft_size / 2 + 1;
        let fmax = MEL_FMAX.min(f64::from(sample_rate) / 2.0);
        let top = hz_to_mel(fmax);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * f64::from(sample_rate) / fft_size as f64;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
        }
        Ok(Self {
            weights,
            n_bins,
            centers: edges[1..=n_mels].to_vec(),
        })
    }

    pub fn n_mels(&self) -> usize {
        self.centers.len()
    }

    /// Peak frequency of every filter in Hz.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.n_bins)
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Orthonormal DCT-II, first `n_out` coefficients.
pub fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .sum();
            s * if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() }
        })
        .collect()
}

/// Per-frame log mel energies (floored) over the standard framing.
pub fn log_mel_frames(clip: &AudioClip, n_mels: usize) -> Result<Vec<Vec<f64>>> {
    if clip.sample_rate() != CANONICAL_RATE {
        return Err(Error::arg(format!(
            "MFCC extraction expects {CANONICAL_RATE} Hz audio, got {} Hz",
            clip.sample_rate()
        )));
    }
    let frames = frame_split(clip, FRAME_LEN, FRAME_OVERLAP)?;
    let analyzer = SpectrumAnalyzer::new(FRAME_LEN, MFCC_FFT, clip.sample_rate())?;
    let bank = MelFilterbank::new(n_mels, MFCC_FFT, clip.sample_rate())?;
    let mut emphasized = vec![0.0; FRAME_LEN];
    frames
        .frames()
        .map(|f| {
            emphasized[0] = f[0];
            for n in 1..f.len() {
                emphasized[n] = f[n] - PRE_EMPHASIS * f[n - 1];
            }
            let spec = analyzer.analyze(&emphasized)?;
            Ok(bank.apply(spec.bins()).into_iter().map(|e| e.max(LOG_FLOOR).ln()).collect())
        })
        .collect()
}

/// MFCC vectors, one per frame of the standard 1024-sample, 50% overlap
/// framing.
pub fn mfcc(clip: &AudioClip, n_mels: usize, n_coeffs: usize) -> Result<Vec<FeatureVector>> {
    if n_coeffs == 0 || n_coeffs > n_mels {
        return Err(Error::arg(format!(
            "cannot keep {n_coeffs} coefficients from {n_mels} mel filters"
        )));
    }
    Ok(log_mel_frames(clip, n_mels)?
        .iter()
        .map(|m| FeatureVector::new(dct2(m, n_coeffs), FeatureKind::Mfcc))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{synth_clip, SynthKind, SynthSpec};

    #[test]
    fn silence_gives_the_floor_cepstrum() {
        let clip = AudioClip::new(vec![0.0; 4000], 16_000).unwrap();
        let v = mfcc(&clip, 40, 13).unwrap();
        assert_eq!(v.len(), frame_split(&clip, 1024, 0.5).unwrap().n_frames());
        let c0 = 40f64.sqrt() * LOG_FLOOR.ln();
        for f in &v {
            assert!((f.values()[0] - c0).abs() < 1e-9);
            assert!(f.values()[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn deterministic() {
        let clip = synth_clip(&SynthSpec::new(SynthKind::Noise { low_hz: 100.0, high_hz: 4000.0 }, 0.5, 3), 16_000).unwrap();
        assert_eq!(mfcc(&clip, 40, 13).unwrap(), mfcc(&clip, 40, 13).unwrap());
    }

    #[test]
    fn tone_excites_the_matching_filter() {
        let clip = synth_clip(&SynthSpec::new(SynthKind::Sine { frequency: 1000.0 }, 0.5, 0), 16_000).unwrap();
        let bank = MelFilterbank::new(40, MFCC_FFT, 16_000).unwrap();
        let closest = bank
            .centers()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;
        for frame in log_mel_frames(&clip, 40).unwrap() {
            let best = frame.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(best, closest);
        }
    }

    #[test]
    fn too_many_coefficients() {
        let clip = AudioClip::new(vec![0.0; 2000], 16_000).unwrap();
        assert!(matches!(mfcc(&clip, 10, 13), Err(Error::Argument(_))));
        let other_rate = AudioClip::new(vec![0.0; 2000], 8_000).unwrap();
        assert!(mfcc(&other_rate, 40, 13).is_err());
    }

    #[test]
    fn dct_of_constant_is_dc_only() {
        let c = dct2(&[2.0; 8], 8);
        assert!((c[0] - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
