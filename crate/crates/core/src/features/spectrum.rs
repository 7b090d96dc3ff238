use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One-sided power spectrum of a frame: `fft_size / 2 + 1` bins of `|X_k|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    bins: Vec<f64>,
    fft_size: usize,
    sample_rate: u32,
}

impl Spectrum {
    pub fn new(bins: Vec<f64>, fft_size: usize, sample_rate: u32) -> Result<Self> {
        if fft_size < 2 || bins.len() != fft_size / 2 + 1 {
            return Err(Error::arg(format!(
                "{} bins do not match FFT size {fft_size}",
                bins.len()
            )));
        }
        if let Some(b) = bins.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(Error::arg(format!("spectrum bins must be finite and non-negative, found {b}")));
        }
        Ok(Self {
            bins,
            fft_size,
            sample_rate,
        })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.fft_size as f64
    }

    /// Signal energy implied by the bins (Parseval): equals the sum of
    /// squares of the windowed, zero-padded frame.
    pub fn energy(&self) -> f64 {
        let n = self.bins.len();
        let edges = self.bins[0] + if self.fft_size % 2 == 0 { self.bins[n - 1] } else { 2.0 * self.bins[n - 1] };
        let mid: f64 = self.bins[1..n - 1].iter().sum();
        (edges + 2.0 * mid) / self.fft_size as f64
    }
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Reusable windowed FFT for frames of a fixed length.
pub struct SpectrumAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    fft_size: usize,
    sample_rate: u32,
}

impl SpectrumAnalyzer {
    pub fn new(frame_len: usize, fft_size: usize, sample_rate: u32) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 2 {
            return Err(Error::arg(format!("FFT size {fft_size} is not a power of two")));
        }
        if frame_len == 0 || frame_len > fft_size {
            return Err(Error::arg(format!("frame length {frame_len} does not fit FFT size {fft_size}")));
        }
        Ok(Self {
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            window: hann(frame_len),
            fft_size,
            sample_rate,
        })
    }

    pub fn analyze(&self, frame: &[f64]) -> Result<Spectrum> {
        if frame.len() != self.window.len() {
            return Err(Error::arg(format!(
                "frame has {} samples, analyzer expects {}",
                frame.len(),
                self.window.len()
            )));
        }
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        for ((b, &x), &w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = x * w;
        }
        self.fft.process(&mut buf);
        let bins = buf[..self.fft_size / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        Spectrum::new(bins, self.fft_size, self.sample_rate)
    }
}

/// Hann-windowed power spectrum of one frame, zero-padded to `fft_size`.
pub fn power_spectrum(frame: &[f64], fft_size: usize, sample_rate: u32) -> Result<Spectrum> {
    if frame.len() > fft_size {
        return Err(Error::arg(format!("frame length {} exceeds FFT size {fft_size}", frame.len())));
    }
    SpectrumAnalyzer::new(frame.len(), fft_size, sample_rate)?.analyze(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_frame_gives_zero_bins() {
        let s = power_spectrum(&[0.0; 512], 1024, 16_000).unwrap();
        assert_eq!(s.bins().len(), 513);
        assert!(s.bins().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn bin_centred_sine_peaks_at_its_bin() {
        for k in [5usize, 64, 200, 500] {
            let frame: Vec<f64> = (0..1024)
                .map(|n| (2.0 * std::f64::consts::PI * k as f64 * n as f64 / 1024.0).sin())
                .collect();
            let s = power_spectrum(&frame, 1024, 16_000).unwrap();
            let peak = s
                .bins()
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, k);
        }
    }

    #[test]
    fn frame_longer_than_fft_is_rejected() {
        assert!(matches!(power_spectrum(&[0.0; 2048], 1024, 16_000), Err(Error::Argument(_))));
        assert!(power_spectrum(&[0.0; 100], 1000, 16_000).is_err());
    }

    proptest! {
        #[test]
        fn parseval(frame in prop::collection::vec(-1.0f64..1.0, 1..1024), pow in 10u32..12) {
            let fft = 1usize << pow;
            let s = power_spectrum(&frame, fft, 16_000).unwrap();
            let w = hann(frame.len());
            let direct: f64 = frame.iter().zip(&w).map(|(x, w)| (x * w).powi(2)).sum();
            let e = s.energy();
            prop_assert!((e - direct).abs() <= 1e-6 * direct.max(1e-12), "{e} vs {direct}");
        }
    }
}
