//! Band-limited resampling with a Blackman-windowed sinc kernel.

use std::f64::consts::PI;

use super::AudioClip;
use crate::{Error, Result};

/// Zero crossings of the sinc kernel on each side of the centre, measured at
/// the lower of the two rates.
const ZERO_CROSSINGS: f64 = 24.0;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1]
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let t = PI * (u + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}

/// Interpolates `input` onto `out_len` evenly spaced points spanning the same
/// duration. `step` is the input-sample distance between output points.
fn interpolate(input: &[f64], out_len: usize, step: f64) -> Vec<f64> {
    let cutoff = (1.0 / step).min(1.0);
    let half_width = ZERO_CROSSINGS / cutoff;
    let n = input.len() as isize;
    (0..out_len)
        .map(|j| {
            let t = j as f64 * step;
            let lo = (t - half_width).ceil().max(0.0) as isize;
            let hi = ((t + half_width).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            for i in lo..=hi {
                let d = t - i as f64;
                acc += input[i as usize] * cutoff * sinc(cutoff * d) * blackman(d / half_width);
            }
            acc
        })
        .collect()
}

/// Resamples `clip` to `target_rate` Hz.
///
/// The output has `round(len * target_rate / rate)` samples. A clip already
/// at the target rate is returned unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::arg("target sample rate must be positive"));
    }
    if target_rate == clip.sample_rate() {
        return Ok(clip.clone());
    }
    let ratio = f64::from(target_rate) / f64::from(clip.sample_rate());
    let out_len = ((clip.len() as f64 * ratio).round() as usize).max(1);
    let out = interpolate(clip.samples(), out_len, 1.0 / ratio);
    Ok(AudioClip::from_clamped(out, target_rate))
}

/// Band-limited stretch of `samples` to exactly `out_len` samples, keeping
/// the nominal sample rate. Used for pitch shifting.
pub fn resample_to_len(samples: &[f64], out_len: usize) -> Vec<f64> {
    if out_len == samples.len() {
        return samples.to_vec();
    }
    if samples.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let step = samples.len() as f64 / out_len as f64;
    interpolate(samples, out_len, step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::peak_frequency;

    fn tone(freq: f64, rate: u32, len: usize) -> AudioClip {
        let s = (0..len)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin())
            .collect();
        AudioClip::new(s, rate).unwrap()
    }

    #[test]
    fn same_rate_is_identity() {
        let c = tone(300.0, 16_000, 500);
        assert_eq!(resample(&c, 16_000).unwrap(), c);
    }

    #[test]
    fn zero_target_rate_is_rejected() {
        assert!(matches!(
            resample(&tone(300.0, 16_000, 10), 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn downsample_keeps_tone() {
        let out = resample(&tone(440.0, 44_100, 44_100), 16_000).unwrap();
        assert_eq!(out.len(), 16_000);
        assert_eq!(out.sample_rate(), 16_000);
        let f = peak_frequency(&out);
        assert!((f - 440.0).abs() <= 4.4, "{f}");
    }

    #[test]
    fn upsample_length() {
        let out = resample(&tone(440.0, 8000, 16_000), 16_000).unwrap();
        assert_eq!(out.len(), 32_000);
    }

    #[test]
    fn round_trip_via_double_rate_keeps_tone() {
        let c = tone(1000.0, 16_000, 16_000);
        let up = resample(&c, 32_000).unwrap();
        let back = resample(&up, 16_000).unwrap();
        assert_eq!(back.len(), c.len());
        let f = peak_frequency(&back);
        assert!((f - 1000.0).abs() <= 10.0, "{f}");
    }

    #[test]
    fn downsampling_removes_content_above_new_nyquist() {
        // 7 kHz at 44.1 kHz folds to 1 kHz at 8 kHz unless filtered
        let c = tone(7000.0, 44_100, 44_100);
        let out = resample(&c, 8000).unwrap();
        let rms = (out.samples().iter().map(|s| s * s).sum::<f64>() / out.len() as f64).sqrt();
        assert!(rms < 0.01, "{rms}");
    }
}
