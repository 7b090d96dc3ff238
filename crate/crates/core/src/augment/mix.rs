use crate::audio::AudioClip;
use crate::{Error, Result};

/// Blends background `noise` into `clip` as `c = (1 - r) * (a + r * b)`.
///
/// The noise is looped or truncated to the clip length. The result is only
/// clamped to [-1, 1] after the formula has been evaluated.
pub fn mix_background(clip: &AudioClip, noise: &AudioClip, r: f64) -> Result<AudioClip> {
    if clip.sample_rate() != noise.sample_rate() {
        return Err(Error::arg(format!(
            "sample rates differ: clip {} Hz, noise {} Hz",
            clip.sample_rate(),
            noise.sample_rate()
        )));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::arg(format!("mix weight {r} outside [0, 1)")));
    }
    let b = noise.samples();
    let out = clip
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &a)| (1.0 - r) * (a + r * b[i % b.len()]))
        .collect();
    Ok(AudioClip::from_clamped(out, clip.sample_rate()))
}
