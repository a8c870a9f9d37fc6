#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavSpec};

pub fn pcm16(path: &Path, samples: &[i16], rate: u32, channels: u16) {
    let spec = WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

pub fn float32(path: &Path, samples: &[f32], rate: u32) {
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for &s in samples {
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

pub fn payload(path: &Path) -> Vec<i16> {
    hound::WavReader::open(path).unwrap().into_samples::<i16>().map(|s| s.unwrap()).collect()
}

/// Decaying harmonic note quantized to 16-bit PCM.
pub fn note(f0: f64, seconds: f64, rate: u32, decay: f64) -> Vec<i16> {
    let len = (seconds * rate as f64) as usize;
    (0..len)
        .map(|k| {
            let t = k as f64 / rate as f64;
            let v: f64 = (1..5).map(|h| (TAU * f0 * h as f64 * t).sin() / h as f64).sum();
            (0.4 * v * (-decay * t).exp() * 32767.0).round() as i16
        })
        .collect()
}

/// Writes two notes to `dir` and returns their paths.
pub fn note_pair(dir: &Path, rate: u32, seconds: f64) -> (PathBuf, PathBuf) {
    let a = dir.join("source.wav");
    let b = dir.join("target.wav");
    pcm16(&a, &note(220.0, seconds, rate, 2.0), rate, 1);
    pcm16(&b, &note(330.0, seconds, rate, 1.0), rate, 1);
    (a, b)
}
