//! Audio ingestion and framing.
//!
//! Everything downstream works on mono [`AudioClip`]s at
//! [`CANONICAL_RATE`]; multi-channel and other-rate material is folded in
//! here.

mod frame;
mod resample;
mod synth;
mod wav;

pub use frame::{frame_split, FrameSet};
pub use resample::{resample, resample_to_len};
pub use synth::{synth_clip, SynthKind, SynthSpec};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Internal sample rate of the whole pipeline, in Hz.
pub const CANONICAL_RATE: u32 = 16_000;

/// Frame length used by the feature extractors (64 ms at 16 kHz).
pub const FRAME_LEN: usize = 1024;

/// Fractional overlap between consecutive frames.
pub const FRAME_OVERLAP: f64 = 0.5;

/// A mono waveform with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Validates and wraps `samples`.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("clip has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::arg(format!(
                "sample {i} is {} (must be finite and within [-1, 1])",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Wraps processed samples, clamping them into [-1, 1].
    ///
    /// Callers guarantee a positive rate; empty input is padded with one zero.
    pub(crate) fn from_clamped(mut samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(sample_rate > 0);
        if samples.is_empty() {
            samples.push(0.0);
        }
        for s in &mut samples {
            *s = if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 };
        }
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Peak absolute amplitude.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// Frequency in Hz of the strongest spectral peak of `clip`.
///
/// Uses a Hann window, zero-padding to at least four times the clip length
/// and parabolic interpolation around the maximum bin.
pub fn peak_frequency(clip: &AudioClip) -> f64 {
    let n = clip.len();
    let size = (4 * n).next_power_of_two().max(2);
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
    let denom = (n.max(2) - 1) as f64;
    for (i, &s) in clip.samples().iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos();
        buf[i].re = s * w;
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let mags: Vec<f64> = buf[..=size / 2].iter().map(|c| c.norm()).collect();
    let k = mags
        .iter()
        .enumerate()
        .skip(1)
        .fold((0, f64::MIN), |best, (i, &m)| if m > best.1 { (i, m) } else { best })
        .0;
    let mut offset = 0.0;
    if k > 0 && k + 1 < mags.len() {
        let (a, b, c) = (mags[k - 1].ln(), mags[k].ln(), mags[k + 1].ln());
        let d = a - 2.0 * b + c;
        if d.abs() > 1e-12 && d.is_finite() {
            offset = 0.5 * (a - c) / d;
        }
    }
    (k as f64 + offset) * f64::from(clip.sample_rate()) / size as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_validation() {
        assert!(AudioClip::new(vec![0.0, 0.5], 0).is_err());
        assert!(matches!(
            AudioClip::new(vec![], 8000),
            Err(Error::EmptyInput(_))
        ));
        assert!(AudioClip::new(vec![1.5], 8000).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 8000).is_err());
        assert!(AudioClip::new(vec![-1.0, 1.0], 8000).is_ok());
    }

    #[test]
    fn clamped_constructor() {
        let c = AudioClip::from_clamped(vec![2.0, -3.0, f64::NAN], 100);
        assert_eq!(c.samples(), &[1.0, -1.0, 0.0]);
        assert_eq!(AudioClip::from_clamped(vec![], 100).len(), 1);
    }

    #[test]
    fn peak_of_sine() {
        let sr = 16_000;
        let s: Vec<f64> = (0..sr)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 1234.0 * i as f64 / sr as f64).sin())
            .collect();
        let f = peak_frequency(&AudioClip::new(s, sr as u32).unwrap());
        assert!((f - 1234.0).abs() < 1.0, "{f}");
    }
}
