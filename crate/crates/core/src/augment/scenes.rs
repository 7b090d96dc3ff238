//! Built-in background scenes for the BN set.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::{synth_clip, AudioClip, SynthKind, SynthSpec};
use crate::rng;

/// A named background recording.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseScene {
    pub name: String,
    pub clip: AudioClip,
}

fn pink(n: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let white = synth_clip(
        &SynthSpec::new(
            SynthKind::Noise {
                low_hz: 0.0,
                high_hz: f64::from(sample_rate) / 2.0,
            },
            n as f64 / f64::from(sample_rate),
            seed,
        ),
        sample_rate,
    )
    .expect("valid white-noise spec");
    let mut buf: Vec<Complex<f64>> = white.samples().iter().map(|&s| Complex::new(s, 0.0)).collect();
    let n = buf.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k).max(1) as f64;
        *c /= bin.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let peak = x.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
    x.iter().map(|s| 0.8 * s / peak).collect()
}

/// White, pink, babble-like and low rumble scenes of `duration` seconds.
pub fn builtin_scenes(sample_rate: u32, duration: f64, seed: u64) -> Vec<NoiseScene> {
    let nyquist = f64::from(sample_rate) / 2.0;
    let n = ((duration * f64::from(sample_rate)).round() as usize).max(1);
    let noise = |low, high, key| {
        synth_clip(
            &SynthSpec::new(SynthKind::Noise { low_hz: low, high_hz: high }, duration, rng::mix_keys(&[seed, key])),
            sample_rate,
        )
        .expect("valid noise spec")
    };

    // Several amplitude-modulated voices over a speech-band noise floor.
    let mut babble = noise(200.0, 3400.0f64.min(nyquist), 3).into_samples();
    for (v, (carrier, rate)) in [(180.0, 3.1), (260.0, 4.3), (410.0, 5.2), (730.0, 2.7)].into_iter().enumerate() {
        if carrier >= nyquist {
            continue;
        }
        let voice = synth_clip(
            &SynthSpec::new(
                SynthKind::AmTone {
                    carrier_hz: carrier,
                    modulation_hz: rate,
                    depth: 0.9,
                },
                duration,
                v as u64,
            )
            .with_amplitude(0.5),
            sample_rate,
        )
        .expect("valid voice spec");
        for (b, s) in babble.iter_mut().zip(voice.samples()) {
            *b = 0.5 * *b + s;
        }
    }
    let peak = babble.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-12);
    babble.iter_mut().for_each(|s| *s *= 0.8 / peak);

    vec![
        NoiseScene {
            name: "white".into(),
            clip: noise(0.0, nyquist, 1),
        },
        NoiseScene {
            name: "pink".into(),
            clip: AudioClip::from_clamped(pink(n, sample_rate, rng::mix_keys(&[seed, 2])), sample_rate),
        },
        NoiseScene {
            name: "babble".into(),
            clip: AudioClip::from_clamped(babble, sample_rate),
        },
        NoiseScene {
            name: "rumble".into(),
            clip: noise(20.0, 300.0f64.min(nyquist), 4),
        },
    ]
}
