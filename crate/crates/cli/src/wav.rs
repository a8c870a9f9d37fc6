//! Mono WAV input and 16-bit PCM output.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{CliError, Result};

const PCM_SCALE: f64 = 32768.0;

fn wav_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Wav {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

/// Samples scaled to [-1, 1) and the sample rate. Accepts 16-bit PCM and
/// 32-bit float.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(CliError::MonoRequired {
            path: path.to_path_buf(),
            channels: spec.channels,
        });
    }
    let samples: std::result::Result<Vec<f64>, hound::Error> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader.into_samples::<i16>().map(|s| s.map(|v| v as f64 / PCM_SCALE)).collect(),
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().map(|s| s.map(|v| v as f64)).collect(),
        (format, bits) => {
            return Err(wav_error(
                path,
                format!("fmt chunk: unsupported codec {bits}-bit {format:?}, expected 16-bit PCM or 32-bit float"),
            ))
        }
    };
    let samples = samples.map_err(|e| wav_error(path, format!("data chunk: {e}")))?;
    Ok((samples, spec.sample_rate))
}

/// Writes 16-bit PCM, saturating out-of-range samples. Returns how many
/// samples were clipped.
pub fn write_wav(path: &Path, signal: &[f64], sample_rate: u32) -> Result<usize> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    let mut clipped = 0;
    for &s in signal {
        let v = (s * PCM_SCALE).round();
        if !(-PCM_SCALE..PCM_SCALE).contains(&v) {
            clipped += 1;
        }
        // `as` saturates and maps NaN to 0
        writer.write_sample(v as i16).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))?;
    if clipped > 0 {
        log::warn!("{}: {clipped} samples saturated at full scale", path.display());
    }
    Ok(clipped)
}
