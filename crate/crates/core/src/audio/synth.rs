//! Deterministic synthetic test signals.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    Sine {
        frequency: f64,
    },
    /// Linear frequency sweep.
    Chirp {
        start_hz: f64,
        end_hz: f64,
    },
    /// Gaussian noise band-limited to `[low_hz, high_hz]`.
    Noise {
        low_hz: f64,
        high_hz: f64,
    },
    /// Exponentially decaying tone bursts repeating at `rate_hz`.
    PulseTrain {
        rate_hz: f64,
        carrier_hz: f64,
        decay_secs: f64,
    },
    AmTone {
        carrier_hz: f64,
        modulation_hz: f64,
        depth: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub kind: SynthKind,
    /// Peak amplitude of the generated signal.
    pub amplitude: f64,
    pub duration: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: SynthKind, duration: f64, seed: u64) -> Self {
        Self {
            kind,
            amplitude: 0.8,
            duration,
            seed,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if sample_rate == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::arg(format!("duration {} must be positive", self.duration)));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return Err(Error::arg(format!("amplitude {} outside [0, 1]", self.amplitude)));
        }
        let below_nyquist = |name: &str, f: f64| {
            if f.is_finite() && f >= 0.0 && f < nyquist {
                Ok(())
            } else {
                Err(Error::arg(format!(
                    "{name} {f} Hz must lie in [0, {nyquist}) for {sample_rate} Hz"
                )))
            }
        };
        match self.kind {
            SynthKind::Sine { frequency } => below_nyquist("frequency", frequency),
            SynthKind::Chirp { start_hz, end_hz } => {
                below_nyquist("start frequency", start_hz)?;
                below_nyquist("end frequency", end_hz)
            }
            SynthKind::Noise { low_hz, high_hz } => {
                below_nyquist("low edge", low_hz)?;
                if !(high_hz > low_hz && high_hz <= nyquist) {
                    return Err(Error::arg(format!(
                        "noise band [{low_hz}, {high_hz}] is empty or exceeds {nyquist} Hz"
                    )));
                }
                Ok(())
            }
            SynthKind::PulseTrain {
                rate_hz,
                carrier_hz,
                decay_secs,
            } => {
                below_nyquist("carrier", carrier_hz)?;
                if !(rate_hz > 0.0 && decay_secs > 0.0) {
                    return Err(Error::arg("pulse rate and decay must be positive"));
                }
                Ok(())
            }
            SynthKind::AmTone {
                carrier_hz,
                modulation_hz,
                depth,
            } => {
                below_nyquist("carrier", carrier_hz)?;
                below_nyquist("modulation rate", modulation_hz)?;
                if !(0.0..=1.0).contains(&depth) {
                    return Err(Error::arg(format!("modulation depth {depth} outside [0, 1]")));
                }
                Ok(())
            }
        }
    }
}

fn band_noise(n: usize, sample_rate: u32, low: f64, high: f64, seed: u64) -> Vec<f64> {
    let mut g = rng::stream(&[seed, 0x6e6f697365]);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(&mut g), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let bin_hz = f64::from(sample_rate) / n as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * bin_hz;
        if f < low || f > high {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Renders `spec` at `sample_rate`. The result is a pure function of its
/// arguments.
pub fn synth_clip(spec: &SynthSpec, sample_rate: u32) -> Result<AudioClip> {
    spec.validate(sample_rate)?;
    let sr = f64::from(sample_rate);
    let n = ((spec.duration * sr).round() as usize).max(1);
    let t = |i: usize| i as f64 / sr;
    let mut x: Vec<f64> = match spec.kind {
        SynthKind::Sine { frequency } => (0..n).map(|i| (2.0 * PI * frequency * t(i)).sin()).collect(),
        SynthKind::Chirp { start_hz, end_hz } => {
            let k = (end_hz - start_hz) / spec.duration;
            (0..n)
                .map(|i| (2.0 * PI * (start_hz * t(i) + 0.5 * k * t(i) * t(i))).sin())
                .collect()
        }
        SynthKind::Noise { low_hz, high_hz } => band_noise(n, sample_rate, low_hz, high_hz, spec.seed),
        SynthKind::PulseTrain {
            rate_hz,
            carrier_hz,
            decay_secs,
        } => (0..n)
            .map(|i| {
                let since = t(i) % (1.0 / rate_hz);
                (-since / decay_secs).exp() * (2.0 * PI * carrier_hz * t(i)).sin()
            })
            .collect(),
        SynthKind::AmTone {
            carrier_hz,
            modulation_hz,
            depth,
        } => (0..n)
            .map(|i| {
                let env = 1.0 - depth * 0.5 * (1.0 - (2.0 * PI * modulation_hz * t(i)).cos());
                env * (2.0 * PI * carrier_hz * t(i)).sin()
            })
            .collect(),
    };
    let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let scale = if peak > 0.0 { spec.amplitude / peak } else { 0.0 };
    for s in &mut x {
        *s *= scale;
    }
    Ok(AudioClip::from_clamped(x, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::peak_frequency;

    #[test]
    fn sine_peak_and_length() {
        let spec = SynthSpec::new(SynthKind::Sine { frequency: 440.0 }, 1.0, 0);
        let clip = synth_clip(&spec, 16_000).unwrap();
        assert_eq!(clip.len(), 16_000);
        assert!((peak_frequency(&clip) - 440.0).abs() < 1.0);
        assert!(clip.peak() <= 0.8 + 1e-12);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let spec = SynthSpec::new(
            SynthKind::Noise {
                low_hz: 0.0,
                high_hz: 8000.0,
            },
            0.5,
            7,
        );
        let a = synth_clip(&spec, 16_000).unwrap();
        let b = synth_clip(&spec, 16_000).unwrap();
        assert_eq!(a, b);
        let other = synth_clip(&SynthSpec { seed: 8, ..spec }, 16_000).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn band_noise_stays_in_band() {
        let spec = SynthSpec::new(
            SynthKind::Noise {
                low_hz: 2000.0,
                high_hz: 2500.0,
            },
            1.0,
            3,
        );
        let f = peak_frequency(&synth_clip(&spec, 16_000).unwrap());
        assert!((1950.0..=2550.0).contains(&f), "{f}");
    }

    #[test]
    fn rejects_invalid_specs() {
        let zero = SynthSpec::new(SynthKind::Sine { frequency: 440.0 }, 0.0, 0);
        assert!(matches!(synth_clip(&zero, 16_000), Err(Error::Argument(_))));
        let high = SynthSpec::new(SynthKind::Sine { frequency: 8000.0 }, 1.0, 0);
        assert!(matches!(synth_clip(&high, 16_000), Err(Error::Argument(_))));
        let depth = SynthSpec::new(
            SynthKind::AmTone {
                carrier_hz: 100.0,
                modulation_hz: 3.0,
                depth: 2.0,
            },
            1.0,
            0,
        );
        assert!(synth_clip(&depth, 16_000).is_err());
    }

    #[test]
    fn other_kinds_render_within_range() {
        for kind in [
            SynthKind::Chirp {
                start_hz: 100.0,
                end_hz: 3000.0,
            },
            SynthKind::PulseTrain {
                rate_hz: 4.0,
                carrier_hz: 900.0,
                decay_secs: 0.03,
            },
            SynthKind::AmTone {
                carrier_hz: 600.0,
                modulation_hz: 5.0,
                depth: 0.7,
            },
        ] {
            let clip = synth_clip(&SynthSpec::new(kind, 0.25, 1), 16_000).unwrap();
            assert_eq!(clip.len(), 4000);
            assert!(clip.peak() <= 0.8 + 1e-12 && clip.peak() > 0.1);
        }
    }
}
