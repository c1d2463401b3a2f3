//! WAV input and output.
//!
//! Integer PCM is scaled to `[-1, 1)`; 32-bit float is passed through.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{invalid, Result};
use crate::gcc::Signal;

/// Reads every channel of a WAV file as its own signal.
pub fn read_wav_channels(path: impl AsRef<Path>) -> Result<Vec<Signal>> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
    };
    if interleaved.is_empty() {
        return Err(invalid("WAV file has no samples"));
    }
    (0..channels)
        .map(|ch| {
            let samples = interleaved.iter().skip(ch).step_by(channels).copied().collect();
            Signal::new(spec.sample_rate as f64, samples)
        })
        .collect()
}

/// Reads a mono WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let mut channels = read_wav_channels(path)?;
    if channels.len() != 1 {
        return Err(invalid(format!(
            "{} has {} channels, expected mono",
            path.display(),
            channels.len()
        )));
    }
    Ok(channels.remove(0))
}

fn integral_rate(signal: &Signal) -> Result<u32> {
    let fs = signal.sample_rate();
    if fs.fract() != 0.0 || fs > u32::MAX as f64 {
        return Err(invalid(format!("sample rate {fs} is not representable in a WAV header")));
    }
    Ok(fs as u32)
}

/// Writes a mono 32-bit float WAV file.
pub fn write_wav_f32(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: integral_rate(signal)?,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for &v in signal.samples() {
        w.write_sample(v as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Writes a mono 16-bit PCM WAV file, clipping to `[-1, 1]`.
pub fn write_wav_i16(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: integral_rate(signal)?,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec)?;
    for &v in signal.samples() {
        let q = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(q)?;
    }
    w.finalize()?;
    Ok(())
}
