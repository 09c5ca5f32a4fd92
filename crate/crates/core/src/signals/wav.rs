//! RIFF/WAVE reading and writing.
//!
//! Reads 16-bit PCM and 32-bit IEEE float files (plain or
//! `WAVE_FORMAT_EXTENSIBLE`) with any channel count; writes the same two
//! encodings. Malformed input is reported with the byte offset at which
//! parsing failed.

use std::fs;
use std::path::Path;

use super::{Signal, SourceClass};
use crate::error::{Error, Result};
use crate::scalar::Real;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Full-scale value used for 16-bit quantisation in both directions.
const PCM16_SCALE: f64 = 32767.0;

/// On-disk sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Pcm16,
    Float32,
}

/// Decoded multi-channel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData<T> {
    pub sample_rate: u32,
    pub format: SampleFormat,
    /// One vector per channel.
    pub channels: Vec<Vec<T>>,
}

/// Loads a mono WAV file as a [`Signal`] labelled [`SourceClass::Unknown`].
pub fn load_wav<T: Real>(path: impl AsRef<Path>) -> Result<Signal<T>> {
    let bytes = fs::read(path)?;
    let data = parse_wav::<T>(&bytes)?;
    if data.channels.len() != 1 {
        return Err(Error::format(
            22,
            format!(
                "expected a mono file, found {} channels",
                data.channels.len()
            ),
        ));
    }
    let samples = data.channels.into_iter().next().unwrap_or_default();
    if samples.is_empty() {
        return Err(Error::format(
            bytes.len() as u64,
            "data chunk holds no samples",
        ));
    }
    Signal::new(samples, data.sample_rate, SourceClass::Unknown)
}

/// Writes a signal as mono 16-bit PCM. Samples outside `[-1, 1]` are clipped.
pub fn store_wav<T: Real>(signal: &Signal<T>, path: impl AsRef<Path>) -> Result<()> {
    write_wav(
        path,
        &[signal.samples()],
        signal.sample_rate(),
        SampleFormat::Pcm16,
    )
}

/// Reads a WAV file with any channel count.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<WavData<T>> {
    let bytes = fs::read(path)?;
    parse_wav(&bytes)
}

/// Writes equal-length channels to a WAV file.
pub fn write_wav<T: Real, C: AsRef<[T]>>(
    path: impl AsRef<Path>,
    channels: &[C],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<()> {
    let bytes = encode_wav(channels, sample_rate, format)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_wav<T: Real, C: AsRef<[T]>>(
    channels: &[C],
    sample_rate: u32,
    format: SampleFormat,
) -> Result<Vec<u8>> {
    if channels.is_empty() || channels.len() > u16::MAX as usize {
        return Err(Error::param(format!(
            "cannot write {} channels",
            channels.len()
        )));
    }
    let frames = channels[0].as_ref().len();
    if channels.iter().any(|c| c.as_ref().len() != frames) {
        return Err(Error::param("all channels must have the same length"));
    }
    let n_ch = channels.len() as u16;
    let (tag, bits) = match format {
        SampleFormat::Pcm16 => (FORMAT_PCM, 16u16),
        SampleFormat::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let block_align = n_ch * bits / 8;
    let data_len = frames as u64 * block_align as u64;
    if data_len + 36 > u32::MAX as u64 {
        return Err(Error::param("audio too long for a RIFF file"));
    }
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for i in 0..frames {
        for ch in channels {
            let v = ch.as_ref()[i].as_f64();
            match format {
                SampleFormat::Pcm16 => {
                    let q = (v.clamp(-1.0, 1.0) * PCM16_SCALE).round() as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                SampleFormat::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    Ok(out)
}

struct Fmt {
    format: SampleFormat,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
}

/// Decodes an in-memory WAV file.
pub fn parse_wav<T: Real>(bytes: &[u8]) -> Result<WavData<T>> {
    let len = bytes.len() as u64;
    if bytes.len() < 12 {
        return Err(Error::format(
            len,
            "file shorter than the 12-byte RIFF header",
        ));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::format(0, "missing RIFF signature"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format(8, "missing WAVE form type"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<Fmt> = None;
    while pos < bytes.len() {
        if pos + 8 > bytes.len() {
            return Err(Error::format(pos as u64, "truncated chunk header"));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if body + size > bytes.len() {
                    return Err(Error::format(body as u64, "truncated fmt chunk"));
                }
                fmt = Some(parse_fmt(&bytes[body..body + size], body)?);
            }
            b"data" => {
                let fmt = fmt.ok_or_else(|| {
                    Error::format(pos as u64, "data chunk appears before fmt chunk")
                })?;
                let available = bytes.len() - body;
                if size > available {
                    return Err(Error::format(
                        bytes.len() as u64,
                        format!("data chunk declares {size} bytes but only {available} remain"),
                    ));
                }
                let align = fmt.block_align as usize;
                if !size.is_multiple_of(align) {
                    return Err(Error::format(
                        (body + size - size % align) as u64,
                        format!("data chunk ends mid-frame ({size} bytes, frame {align})"),
                    ));
                }
                return Ok(decode_samples(&bytes[body..body + size], &fmt));
            }
            _ => {
                if body + size > bytes.len() {
                    return Err(Error::format(body as u64, "truncated chunk"));
                }
            }
        }
        pos = body + size + (size & 1);
    }
    Err(Error::format(len, "no data chunk found"))
}

fn parse_fmt(chunk: &[u8], offset: usize) -> Result<Fmt> {
    if chunk.len() < 16 {
        return Err(Error::format(
            offset as u64,
            "fmt chunk shorter than 16 bytes",
        ));
    }
    let u16_at = |i: usize| u16::from_le_bytes([chunk[i], chunk[i + 1]]);
    let mut tag = u16_at(0);
    let channels = u16_at(2);
    let sample_rate = u32::from_le_bytes(chunk[4..8].try_into().unwrap());
    let block_align = u16_at(12);
    let bits = u16_at(14);
    if tag == FORMAT_EXTENSIBLE {
        if chunk.len() < 26 {
            return Err(Error::format(
                offset as u64 + 16,
                "extensible fmt chunk missing sub-format",
            ));
        }
        tag = u16_at(24);
    }
    if channels == 0 {
        return Err(Error::format(offset as u64 + 2, "zero channels"));
    }
    let format = match (tag, bits) {
        (FORMAT_PCM, 16) => SampleFormat::Pcm16,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        _ => {
            return Err(Error::format(
                offset as u64,
                format!("unsupported encoding (format tag {tag}, {bits} bits per sample)"),
            ))
        }
    };
    if block_align as u32 != channels as u32 * bits as u32 / 8 {
        return Err(Error::format(
            offset as u64 + 12,
            format!("block alignment {block_align} inconsistent with {channels}x{bits} bits"),
        ));
    }
    Ok(Fmt {
        format,
        channels,
        sample_rate,
        block_align,
    })
}

fn decode_samples<T: Real>(data: &[u8], fmt: &Fmt) -> WavData<T> {
    let n_ch = fmt.channels as usize;
    let frames = data.len() / fmt.block_align as usize;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    let width = fmt.block_align as usize / n_ch;
    for frame in data.chunks_exact(fmt.block_align as usize) {
        for (c, raw) in frame.chunks_exact(width).enumerate() {
            let v = match fmt.format {
                SampleFormat::Pcm16 => i16::from_le_bytes([raw[0], raw[1]]) as f64 / PCM16_SCALE,
                SampleFormat::Float32 => {
                    f32::from_le_bytes([raw[0], raw[1], raw[2], raw[3]]) as f64
                }
            };
            channels[c].push(T::of(v));
        }
    }
    WavData {
        sample_rate: fmt.sample_rate,
        format: fmt.format,
        channels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn pcm16_round_trip_within_quantisation() {
        let x = ramp(1000);
        let sig = Signal::new(x.clone(), 22050, SourceClass::Drone).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ramp.wav");
        store_wav(&sig, &path).unwrap();
        let back: Signal<f64> = load_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 22050);
        assert_eq!(back.label(), SourceClass::Unknown);
        let worst = x
            .iter()
            .zip(back.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1.0 / 32768.0, "max error {worst}");
    }

    #[test]
    fn float32_multichannel_round_trip() {
        let a: Vec<f64> = ramp(64).iter().map(|v| v * 3.0).collect();
        let b: Vec<f64> = ramp(64).iter().rev().copied().collect();
        let bytes = encode_wav(&[a.clone(), b.clone()], 24000, SampleFormat::Float32).unwrap();
        let d: WavData<f64> = parse_wav(&bytes).unwrap();
        assert_eq!(d.channels.len(), 2);
        assert_eq!(d.format, SampleFormat::Float32);
        for (x, y) in a.iter().zip(&d.channels[0]) {
            assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
        }
        for (x, y) in b.iter().zip(&d.channels[1]) {
            assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn stereo_file_rejected_by_mono_loader() {
        let x = ramp(10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        write_wav(&path, &[x.clone(), x], 22050, SampleFormat::Pcm16).unwrap();
        assert!(matches!(load_wav::<f64>(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn truncated_data_reports_offset() {
        let bytes = encode_wav(&[ramp(100)], 22050, SampleFormat::Pcm16).unwrap();
        let cut = &bytes[..bytes.len() - 7];
        match parse_wav::<f64>(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, cut.len() as u64),
            other => panic!("expected format error, got {other:?}"),
        }
        match parse_wav::<f64>(&bytes[..6]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_encoding_rejected() {
        let mut bytes = encode_wav(&[ramp(8)], 22050, SampleFormat::Pcm16).unwrap();
        // rewrite as 8-bit PCM
        bytes[34] = 8;
        bytes[32] = 1;
        match parse_wav::<f64>(&bytes) {
            Err(Error::Format { offset, message }) => {
                assert_eq!(offset, 20);
                assert!(message.contains("unsupported"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_signature() {
        let mut bytes = encode_wav(&[ramp(8)], 22050, SampleFormat::Pcm16).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            parse_wav::<f64>(&bytes),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
