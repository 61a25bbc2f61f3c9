//! Minimal RIFF/WAVE reader for 16-bit PCM mono files.
//!
//! The on-disk layout is a `RIFF` container holding a `WAVE` form: a `fmt `
//! chunk describing the encoding followed (possibly after unrelated chunks,
//! which are skipped) by a `data` chunk of little-endian samples.  Only
//! format tag 1 (integer PCM) with 16 bits per sample and one channel is
//! accepted; anything else is reported through a variant specific enough to
//! tell the caller what to transcode.

use super::{AudioSignal, FeatureError};
use crate::scalar::Real;
use std::fs;
use std::path::Path;

const PCM_FORMAT_TAG: u16 = 1;

/// Scale applied to raw 16-bit samples, mapping them into [-1, 1).
const PCM16_SCALE: f64 = 1.0 / 32768.0;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], FeatureError> {
        if self.pos + n > self.bytes.len() {
            return Err(FeatureError::MalformedWav(format!(
                "file ends inside {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn tag(&mut self, what: &str) -> Result<[u8; 4], FeatureError> {
        let s = self.take(4, what)?;
        Ok([s[0], s[1], s[2], s[3]])
    }

    fn u32_le(&mut self, what: &str) -> Result<u32, FeatureError> {
        let s = self.take(4, what)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u16_le(&mut self, what: &str) -> Result<u16, FeatureError> {
        let s = self.take(2, what)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }
}

struct Format {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Decode a 16-bit PCM mono WAV file into an [`AudioSignal`].
///
/// Samples are scaled by 1/32768, so +32767 maps to 32767/32768 and -32768
/// to exactly -1.
pub fn load_wav<T: Real>(path: &Path) -> Result<AudioSignal<T>, FeatureError> {
    let bytes = fs::read(path)?;
    decode_wav(&bytes)
}

/// Decode an in-memory WAV image; see [`load_wav`].
pub fn decode_wav<T: Real>(bytes: &[u8]) -> Result<AudioSignal<T>, FeatureError> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.tag("RIFF header")? != b"RIFF" {
        return Err(FeatureError::MalformedWav("missing RIFF magic".into()));
    }
    r.u32_le("RIFF size")?;
    if &r.tag("WAVE form type")? != b"WAVE" {
        return Err(FeatureError::MalformedWav("RIFF form is not WAVE".into()));
    }

    let mut format: Option<Format> = None;
    loop {
        if r.pos == r.bytes.len() {
            return Err(FeatureError::MalformedWav("no data chunk".into()));
        }
        let id = r.tag("chunk id")?;
        let size = r.u32_le("chunk size")? as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(FeatureError::MalformedWav(format!(
                        "fmt chunk is {size} bytes, need at least 16"
                    )));
                }
                let body_start = r.pos;
                let format_tag = r.u16_le("format tag")?;
                let channels = r.u16_le("channel count")?;
                let sample_rate = r.u32_le("sample rate")?;
                r.u32_le("byte rate")?;
                r.u16_le("block align")?;
                let bits_per_sample = r.u16_le("bits per sample")?;
                r.pos = body_start;
                r.take(size, "fmt chunk body")?;
                format = Some(Format { format_tag, channels, sample_rate, bits_per_sample });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| {
                    FeatureError::MalformedWav("data chunk before fmt chunk".into())
                })?;
                if fmt.format_tag != PCM_FORMAT_TAG || fmt.bits_per_sample != 16 {
                    return Err(FeatureError::UnsupportedEncoding {
                        format_tag: fmt.format_tag,
                        bits_per_sample: fmt.bits_per_sample,
                    });
                }
                if fmt.channels != 1 {
                    return Err(FeatureError::NotMono(fmt.channels));
                }
                if size % 2 != 0 {
                    return Err(FeatureError::MalformedWav(format!(
                        "data chunk size {size} is not a whole number of 16-bit samples"
                    )));
                }
                let payload = r.take(size, "data chunk body")?;
                let samples = payload
                    .chunks_exact(2)
                    .map(|pair| {
                        let raw = i16::from_le_bytes([pair[0], pair[1]]);
                        T::cast(f64::from(raw) * PCM16_SCALE)
                    })
                    .collect();
                return AudioSignal::new(samples, fmt.sample_rate);
            }
            _ => {
                // Unrelated chunk (LIST, fact, ...): skip body plus the
                // RIFF pad byte that keeps chunks 2-byte aligned.
                r.take(size + size % 2, "chunk body")?;
            }
        }
    }
}

/// Write raw 16-bit samples as a minimal mono WAV file.
///
/// The counterpart of [`load_wav`], mainly for producing test fixtures and
/// synthetic audio on disk.
pub fn write_wav_pcm16(path: &Path, samples: &[i16], sample_rate: u32) -> Result<(), FeatureError> {
    let data_len = samples.len() * 2;
    let mut bytes = Vec::with_capacity(44 + data_len);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&u32::try_from(36 + data_len).unwrap_or(u32::MAX).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes());
    bytes.extend_from_slice(&sample_rate.to_le_bytes());
    bytes.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    bytes.extend_from_slice(&2u16.to_le_bytes());
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&u32::try_from(data_len).unwrap_or(u32::MAX).to_le_bytes());
    for s in samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}
