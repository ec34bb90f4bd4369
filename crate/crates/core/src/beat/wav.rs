//! Minimal RIFF/WAVE reader for uncompressed audio: 16-bit integer PCM and
//! 32-bit float, any channel count, downmixed to mono.

use super::{BeatError, Result};
use crate::signal_core::TimeSeries;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavFormat {
    pub format_tag: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn bad(msg: impl Into<String>) -> BeatError {
    BeatError::BadAudio(msg.into())
}

/// Decodes a WAV file, averaging all channels into one.
pub fn read_wav(bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("not a RIFF/WAVE file"));
    }
    let mut format: Option<WavFormat> = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let mut tag = u16_at(body, 0);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(bad("extensible fmt chunk too short"));
                    }
                    // First two bytes of the sub-format GUID carry the tag.
                    tag = u16_at(body, 24);
                }
                format = Some(WavFormat {
                    format_tag: tag,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        at = body_start.saturating_add(size).saturating_add(size & 1);
    }
    let format = format.ok_or_else(|| bad("missing fmt chunk"))?;
    let data = data.ok_or_else(|| bad("missing data chunk"))?;
    if format.channels == 0 || format.sample_rate == 0 {
        return Err(bad("zero channels or sample rate"));
    }
    let decode: fn(&[u8]) -> f64 = match (format.format_tag, format.bits_per_sample) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (FORMAT_FLOAT, 32) => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (tag, bits) => return Err(bad(format!("unsupported encoding: format {tag}, {bits} bits"))),
    };
    let width = format.bits_per_sample as usize / 8;
    let frame_bytes = width * format.channels as usize;
    let scale = 1.0 / format.channels as f64;
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| frame.chunks_exact(width).map(decode).sum::<f64>() * scale)
        .collect();
    TimeSeries::new(samples, format.sample_rate as f64).map_err(|e| bad(e.to_string()))
}

/// Encodes mono samples in [-1, 1] as 16-bit PCM.
pub fn write_wav_pcm16(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
