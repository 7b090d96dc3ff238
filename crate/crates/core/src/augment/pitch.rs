use super::stretch::stretch_samples;
use crate::audio::{resample_to_len, AudioClip};
use crate::{Error, Result};

/// Shifts the pitch of `clip` by `semitones` without changing its length.
///
/// The clip is first time-stretched by `2^(semitones/12)` and then
/// band-limited resampled back to its original sample count.
pub fn pitch_shift(clip: &AudioClip, semitones: f64) -> Result<AudioClip> {
    if !(semitones.abs() <= 12.0) {
        return Err(Error::arg(format!(
            "pitch shift of {semitones} semitones exceeds one octave"
        )));
    }
    if semitones == 0.0 {
        return Ok(clip.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let stretched_len = ((clip.len() as f64 * ratio).round() as usize).max(1);
    let stretched = stretch_samples(clip.samples(), 1.0 / ratio, stretched_len);
    let shifted = resample_to_len(&stretched, clip.len());
    Ok(AudioClip::from_clamped(shifted, clip.sample_rate()))
}
