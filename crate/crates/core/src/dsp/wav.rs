//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads PCM16 and IEEE float32, any channel count (downmixed by averaging).
//! Writes PCM16 mono.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono audio with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl WaveBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    /// Cut to `len` samples or right-pad with zeros.
    pub fn fit_to_len(&self, len: usize) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self::new(samples, self.sample_rate)
    }
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveBuffer> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<WaveBuffer> {
    let malformed = |msg: &str| Error::MalformedWav(msg.to_string());
    if bytes.len() < 12 {
        return Err(malformed("file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(malformed("truncated chunk header"));
        }
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                let mut tag = le_u16(body, 0);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(malformed("extensible fmt chunk too short"));
                    }
                    // First two bytes of the subformat GUID carry the format tag.
                    tag = le_u16(body, 24);
                }
                format = Some(Format {
                    tag,
                    channels: le_u16(body, 2),
                    sample_rate: le_u32(body, 4),
                    bits: le_u16(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }

    let format = format.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    if format.channels == 0 {
        return Err(malformed("zero channels"));
    }
    if format.sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }

    let channels = format.channels as usize;
    let decoded: Vec<f32> = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        (format_tag, bits_per_sample) => {
            return Err(Error::UnsupportedCodec {
                format_tag,
                bits_per_sample,
            })
        }
    };
    if decoded.len() < channels {
        return Err(Error::EmptyData);
    }

    let samples = if channels == 1 {
        decoded
    } else {
        decoded
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    WaveBuffer::new(samples, format.sample_rate)
}

pub fn write_wav(path: impl AsRef<Path>, buffer: &WaveBuffer) -> Result<()> {
    let bytes = write_wav_bytes(buffer)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Encode as 16-bit PCM mono. Samples are clamped to `[-1, 1]` first.
pub fn write_wav_bytes(buffer: &WaveBuffer) -> Result<Vec<u8>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let data_len = buffer.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in buffer.samples() {
        let q = (s.clamp(-1.0, 1.0) as f64 * 32768.0)
            .round()
            .clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}
