use super::AudioClip;
use crate::{Error, Result};

/// Overlapping fixed-length windows cut from a clip, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    data: Vec<f64>,
    frame_len: usize,
    hop: usize,
    source_rate: u32,
}

impl FrameSet {
    pub fn n_frames(&self) -> usize {
        self.data.len() / self.frame_len
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn source_rate(&self) -> u32 {
        self.source_rate
    }

    pub fn frame(&self, r: usize) -> &[f64] {
        &self.data[r * self.frame_len..(r + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len)
    }
}

/// Splits `clip` into frames of `frame_len` samples overlapping by
/// `overlap_ratio`.
///
/// The hop is `round(frame_len * (1 - overlap_ratio))`. A clip shorter than
/// one frame yields a single zero-padded frame; trailing samples that do not
/// fill a whole hop are dropped.
pub fn frame_split(clip: &AudioClip, frame_len: usize, overlap_ratio: f64) -> Result<FrameSet> {
    if frame_len < 2 {
        return Err(Error::arg(format!("frame length {frame_len} is below 2")));
    }
    if !(0.0..1.0).contains(&overlap_ratio) {
        return Err(Error::arg(format!(
            "overlap ratio {overlap_ratio} outside [0, 1)"
        )));
    }
    let hop = ((frame_len as f64 * (1.0 - overlap_ratio)).round() as usize).max(1);
    let samples = clip.samples();
    let data = if samples.len() < frame_len {
        let mut padded = samples.to_vec();
        padded.resize(frame_len, 0.0);
        padded
    } else {
        let n_frames = (samples.len() - frame_len) / hop + 1;
        let mut data = Vec::with_capacity(n_frames * frame_len);
        for r in 0..n_frames {
            data.extend_from_slice(&samples[r * hop..r * hop + frame_len]);
        }
        data
    };
    Ok(FrameSet {
        data,
        frame_len,
        hop,
        source_rate: clip.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(len: usize) -> AudioClip {
        AudioClip::new((0..len).map(|i| i as f64 / len as f64).collect(), 16_000).unwrap()
    }

    #[test]
    fn one_second_at_half_overlap() {
        let fs = frame_split(&ramp(16_000), 1024, 0.5).unwrap();
        assert_eq!(fs.hop(), 512);
        assert_eq!(fs.n_frames(), 30);
    }

    #[test]
    fn exact_fit_is_one_frame() {
        let clip = ramp(1024);
        for overlap in [0.0, 0.25, 0.5, 0.9] {
            let fs = frame_split(&clip, 1024, overlap).unwrap();
            assert_eq!(fs.n_frames(), 1);
            assert_eq!(fs.frame(0), clip.samples());
        }
    }

    #[test]
    fn short_clip_is_zero_padded() {
        let clip = ramp(500);
        let fs = frame_split(&clip, 1024, 0.5).unwrap();
        assert_eq!(fs.n_frames(), 1);
        assert_eq!(&fs.frame(0)[..500], clip.samples());
        assert!(fs.frame(0)[500..].iter().all(|&s| s == 0.0));
        assert_eq!(fs.frame(0).len(), 1024);
    }

    #[test]
    fn bad_arguments() {
        let clip = ramp(100);
        assert!(frame_split(&clip, 1, 0.5).is_err());
        assert!(frame_split(&clip, 16, 1.0).is_err());
        assert!(frame_split(&clip, 16, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn frame_count_and_positions(frame_len in 2usize..300, extra in 0usize..2000, overlap in 0.0f64..0.95) {
            let clip = ramp(frame_len + extra);
            let fs = frame_split(&clip, frame_len, overlap).unwrap();
            let hop = fs.hop();
            prop_assert_eq!(hop, ((frame_len as f64 * (1.0 - overlap)).round() as usize).max(1));
            prop_assert_eq!(fs.n_frames(), (clip.len() - frame_len) / hop + 1);
            for (r, frame) in fs.frames().enumerate() {
                for (k, &s) in frame.iter().enumerate() {
                    prop_assert_eq!(s, clip.samples()[r * hop + k]);
                }
            }
            // consecutive frames share frame_len - hop samples
            if fs.n_frames() > 1 && hop < frame_len {
                prop_assert_eq!(&fs.frame(0)[hop..], &fs.frame(1)[..frame_len - hop]);
            }
        }
    }
}
