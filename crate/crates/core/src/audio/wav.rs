//! RIFF/WAVE codec for 16-bit integer PCM.

use std::path::Path;

use super::AudioClip;
use crate::{fsutil, Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xfffe;

struct Fmt {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<Fmt> {
    if body.len() < 16 {
        return Err(Error::Format(format!("fmt chunk is {} bytes", body.len())));
    }
    let mut tag = u16_at(body, 0);
    if tag == FORMAT_EXTENSIBLE {
        if body.len() < 40 {
            return Err(Error::Format("truncated WAVE_FORMAT_EXTENSIBLE header".into()));
        }
        // First two bytes of the sub-format GUID carry the real format tag.
        tag = u16_at(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(Error::UnsupportedFormat(format!(
            "format tag {tag:#06x} (only integer PCM is supported)"
        )));
    }
    let fmt = Fmt {
        channels: u16_at(body, 2),
        sample_rate: u32_at(body, 4),
        bits: u16_at(body, 14),
    };
    if fmt.bits != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "{}-bit samples (only 16-bit is supported)",
            fmt.bits
        )));
    }
    if !(1..=2).contains(&fmt.channels) {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels (only mono and stereo are supported)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(Error::Format("sample rate is zero".into()));
    }
    Ok(fmt)
}

/// Decodes an in-memory WAV file. Stereo is averaged down to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE header".into()));
    }
    let mut fmt = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "chunk {:?} declares {size} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    bytes.len() - body_start
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        pos = body_end + (size & 1);
    }
    let fmt = fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;
    if data.is_empty() {
        return Err(Error::EmptyInput("data chunk has no samples".into()));
    }
    let channels = usize::from(fmt.channels);
    let block = 2 * channels;
    if data.len() % block != 0 {
        return Err(Error::Format(format!(
            "data chunk of {} bytes is not a whole number of {block}-byte frames",
            data.len()
        )));
    }
    let samples = data
        .chunks_exact(block)
        .map(|frame| {
            let sum: f64 = frame
                .chunks_exact(2)
                .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
                .sum();
            sum / channels as f64
        })
        .collect();
    AudioClip::new(samples, fmt.sample_rate)
}

/// Reads a 16-bit PCM WAV file from disk.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Encodes `clip` as a mono 16-bit PCM WAV file.
///
/// Samples are scaled by 32768 and rounded, so a clip read back from disk
/// re-encodes to identical bytes.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = 2 * clip.len();
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

/// Writes `clip` to `path` atomically.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    fsutil::write_atomic(path.as_ref(), &encode_wav(clip))
}
