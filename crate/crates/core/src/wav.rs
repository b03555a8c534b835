//! Minimal RIFF/WAVE reader and writer for mono PCM data.
//!
//! Supports format code 1 (integer PCM) at 8 or 16 bits. Samples are
//! mapped to `f64` amplitudes in `[-1, 1]`: 16-bit values divide by
//! 32768, 8-bit (unsigned) values map through `(v - 128) / 128`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::signal::RawSignal;

const PCM_FORMAT_CODE: u16 = 1;

pub fn load_wav<P: AsRef<Path>>(path: P) -> Result<RawSignal> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = BufReader::new(File::open(path)?);

    let mut riff = [0u8; 4];
    reader
        .read_exact(&mut riff)
        .map_err(|_| Error::MalformedWav("file shorter than RIFF header".into()))?;
    if &riff != b"RIFF" {
        return Err(Error::MalformedWav("missing RIFF magic".into()));
    }
    let _riff_size = read_u32(&mut reader)?;
    let mut wave = [0u8; 4];
    reader
        .read_exact(&mut wave)
        .map_err(|_| Error::MalformedWav("truncated WAVE tag".into()))?;
    if &wave != b"WAVE" {
        return Err(Error::MalformedWav("missing WAVE tag".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    loop {
        let mut chunk_id = [0u8; 4];
        if reader.read_exact(&mut chunk_id).is_err() {
            return Err(Error::MalformedWav("no data chunk found".into()));
        }
        let chunk_size = read_u32(&mut reader)?;
        match &chunk_id {
            b"fmt " => {
                if chunk_size < 16 {
                    return Err(Error::MalformedWav("fmt chunk too short".into()));
                }
                let format_code = read_u16(&mut reader)?;
                let channels = read_u16(&mut reader)?;
                let sample_rate = read_u32(&mut reader)?;
                let _byte_rate = read_u32(&mut reader)?;
                let _block_align = read_u16(&mut reader)?;
                let bits_per_sample = read_u16(&mut reader)?;
                // skip any fmt extension bytes
                skip(&mut reader, chunk_size as i64 - 16)?;
                fmt = Some((format_code, channels, sample_rate, bits_per_sample));
            }
            b"data" => {
                let (format_code, channels, sample_rate, bits) = fmt
                    .ok_or_else(|| Error::MalformedWav("data chunk before fmt chunk".into()))?;
                if format_code != PCM_FORMAT_CODE {
                    return Err(Error::MalformedWav(format!(
                        "unsupported format code {format_code} (only PCM)"
                    )));
                }
                if channels != 1 {
                    return Err(Error::MultiChannel(channels));
                }
                if sample_rate == 0 {
                    return Err(Error::MalformedWav("zero sample rate".into()));
                }
                let samples = match bits {
                    16 => {
                        let n = chunk_size as usize / 2;
                        let mut out = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = reader.read_i16::<LittleEndian>().map_err(|_| {
                                Error::MalformedWav("data chunk truncated".into())
                            })?;
                            out.push(f64::from(v) / 32768.0);
                        }
                        out
                    }
                    8 => {
                        let n = chunk_size as usize;
                        let mut out = Vec::with_capacity(n);
                        for _ in 0..n {
                            let v = reader.read_u8().map_err(|_| {
                                Error::MalformedWav("data chunk truncated".into())
                            })?;
                            out.push((f64::from(v) - 128.0) / 128.0);
                        }
                        out
                    }
                    other => return Err(Error::UnsupportedBitDepth(other)),
                };
                if samples.is_empty() {
                    return Err(Error::EmptySignal);
                }
                return RawSignal::new(samples, sample_rate);
            }
            _ => {
                // chunks are word-aligned
                skip(&mut reader, chunk_size as i64 + (chunk_size % 2) as i64)?;
            }
        }
    }
}

/// Write a signal as 16-bit mono PCM. Amplitudes are clamped to `[-1, 1]`.
pub fn write_wav<P: AsRef<Path>>(path: P, signal: &RawSignal) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let n = signal.samples.len() as u32;
    let data_bytes = n * 2;

    w.write_all(b"RIFF")?;
    w.write_u32::<LittleEndian>(36 + data_bytes)?;
    w.write_all(b"WAVE")?;
    w.write_all(b"fmt ")?;
    w.write_u32::<LittleEndian>(16)?;
    w.write_u16::<LittleEndian>(PCM_FORMAT_CODE)?;
    w.write_u16::<LittleEndian>(1)?;
    w.write_u32::<LittleEndian>(signal.sample_rate_hz)?;
    w.write_u32::<LittleEndian>(signal.sample_rate_hz * 2)?;
    w.write_u16::<LittleEndian>(2)?;
    w.write_u16::<LittleEndian>(16)?;
    w.write_all(b"data")?;
    w.write_u32::<LittleEndian>(data_bytes)?;
    for &s in &signal.samples {
        let clamped = s.clamp(-1.0, 1.0);
        let q = (clamped * 32767.0).round() as i16;
        w.write_i16::<LittleEndian>(q)?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    r.read_u32::<LittleEndian>()
        .map_err(|_| Error::MalformedWav("unexpected end of file".into()))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    r.read_u16::<LittleEndian>()
        .map_err(|_| Error::MalformedWav("unexpected end of file".into()))
}

fn skip<R: Read + Seek>(r: &mut R, bytes: i64) -> Result<()> {
    if bytes > 0 {
        r.seek(SeekFrom::Current(bytes))
            .map_err(|_| Error::MalformedWav("chunk overruns file".into()))?;
    }
    Ok(())
}
