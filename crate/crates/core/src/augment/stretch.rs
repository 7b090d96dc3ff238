//! Phase-vocoder time stretching.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioClip;
use crate::{Error, Result};

pub(crate) const N_FFT: usize = 1024;
/// STFT hop used for both analysis and synthesis.
pub const STRETCH_HOP: usize = N_FFT / 4;

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn wrap_phase(p: f64) -> f64 {
    p - 2.0 * PI * (p / (2.0 * PI)).round()
}

/// Changes the duration of `clip` by `1 / rate` while keeping its pitch.
///
/// `rate > 1` shortens the clip. The output has exactly
/// `round(len / rate)` samples.
pub fn time_stretch(clip: &AudioClip, rate: f64) -> Result<AudioClip> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::arg(format!("stretch rate {rate} must be positive")));
    }
    let out_len = ((clip.len() as f64 / rate).round() as usize).max(1);
    let samples = stretch_samples(clip.samples(), rate, out_len);
    Ok(AudioClip::from_clamped(samples, clip.sample_rate()))
}

pub(crate) fn stretch_samples(input: &[f64], rate: f64, out_len: usize) -> Vec<f64> {
    let half = N_FFT / 2;
    let window = hann(N_FFT);
    let mut padded = vec![0.0; half];
    padded.extend_from_slice(input);
    padded.resize(padded.len() + half + N_FFT, 0.0);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(N_FFT);
    let ifft = planner.plan_fft_inverse(N_FFT);

    // Analysis STFT, one-sided.
    let n_frames = input.len() / STRETCH_HOP + 2;
    let bins = half + 1;
    let mut stft: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n_frames + 1);
    let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
    for m in 0..n_frames {
        let start = m * STRETCH_HOP;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(padded[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        stft.push(buf[..bins].to_vec());
    }
    stft.push(vec![Complex::new(0.0, 0.0); bins]);

    let omega: Vec<f64> = (0..bins)
        .map(|k| 2.0 * PI * k as f64 * STRETCH_HOP as f64 / N_FFT as f64)
        .collect();
    let mut phase: Vec<f64> = stft[0].iter().map(|c| c.arg()).collect();

    let n_out_frames = ((n_frames as f64) / rate).ceil() as usize;
    let total = (n_out_frames + 1) * STRETCH_HOP + N_FFT;
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];

    for j in 0..n_out_frames {
        let step = j as f64 * rate;
        let m = step.floor() as usize;
        if m + 1 >= stft.len() {
            break;
        }
        let alpha = step - m as f64;
        let (a, b) = (&stft[m], &stft[m + 1]);
        for k in 0..bins {
            let mag = (1.0 - alpha) * a[k].norm() + alpha * b[k].norm();
            buf[k] = Complex::from_polar(mag, phase[k]);
        }
        for k in 1..half {
            buf[N_FFT - k] = buf[k].conj();
        }
        ifft.process(&mut buf);
        let start = j * STRETCH_HOP;
        for i in 0..N_FFT {
            out[start + i] += buf[i].re / N_FFT as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
        for k in 0..bins {
            let dphi = wrap_phase(b[k].arg() - a[k].arg() - omega[k]);
            phase[k] += omega[k] + dphi;
        }
    }

    (0..out_len)
        .map(|i| {
            let idx = i + half;
            if idx < total && norm[idx] > 1e-8 {
                out[idx] / norm[idx]
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{peak_frequency, synth_clip, SynthKind, SynthSpec};

    fn tone(freq: f64, secs: f64) -> AudioClip {
        synth_clip(&SynthSpec::new(SynthKind::Sine { frequency: freq }, secs, 0), 16_000).unwrap()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len());
        let dot: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum();
        let na: f64 = a[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b[..n].iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn unit_rate_reconstructs_input() {
        let clip = synth_clip(
            &SynthSpec::new(
                SynthKind::Chirp {
                    start_hz: 200.0,
                    end_hz: 3000.0,
                },
                0.5,
                0,
            ),
            16_000,
        )
        .unwrap();
        let out = time_stretch(&clip, 1.0).unwrap();
        assert_eq!(out.len(), clip.len());
        assert!(correlation(out.samples(), clip.samples()) > 0.99);
    }

    #[test]
    fn double_rate_halves_length_and_keeps_pitch() {
        let out = time_stretch(&tone(440.0, 1.0), 2.0).unwrap();
        assert_eq!(out.len(), 8000);
        let f = peak_frequency(&out);
        assert!((f - 440.0).abs() <= 0.03 * 440.0, "{f}");
    }

    #[test]
    fn slow_rate_lengthens() {
        let out = time_stretch(&tone(440.0, 1.0), 0.80).unwrap();
        assert_eq!(out.len(), 20_000);
        let f = peak_frequency(&out);
        assert!((f - 440.0).abs() <= 0.03 * 440.0, "{f}");
        assert_eq!(out.sample_rate(), 16_000);
    }

    #[test]
    fn rejects_non_positive_rate() {
        assert!(time_stretch(&tone(440.0, 0.1), 0.0).is_err());
        assert!(time_stretch(&tone(440.0, 0.1), -1.0).is_err());
    }

    #[test]
    fn very_short_clip() {
        let clip = AudioClip::new(vec![0.1, -0.2, 0.3], 16_000).unwrap();
        assert_eq!(time_stretch(&clip, 0.5).unwrap().len(), 6);
    }
}
