//! Short-time Fourier analysis and synthesis.
//!
//! Frames are whole Hann windows lying inside the signal (no padding, the last
//! partial frame is dropped). The FFT length equals the window length, so a
//! window of `W` samples yields `W / 2 + 1` one-sided bins. Synthesis is
//! weighted overlap-add with the analysis window, divided by the summed squared
//! window, which makes `istft` the least-squares inverse of `stft`.
//!
//! Spectrogram arrays are stored frame-major: entry `(m, n)` lives at
//! `n * bins + m`, the same order as the t-f grid index map.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::transport::{CoordinateMode, TfDistribution, TfGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    sample_rate_hz: u32,
    window_ms: f64,
    overlap_frac: f64,
    window_samples: usize,
    hop_samples: usize,
}

impl AnalysisConfig {
    pub fn new(sample_rate_hz: u32, window_ms: f64, overlap_frac: f64) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if !(window_ms.is_finite() && window_ms > 0.0) {
            return Err(Error::InvalidConfig(format!("window duration {window_ms} ms")));
        }
        if !(0.0..1.0).contains(&overlap_frac) {
            return Err(Error::InvalidConfig(format!(
                "overlap {overlap_frac} outside [0, 1)"
            )));
        }
        let window_samples = (sample_rate_hz as f64 * window_ms / 1000.0).round() as usize;
        if window_samples < 2 || window_samples % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "window of {window_samples} samples; an even length of at least 2 is required"
            )));
        }
        let hop_samples = (window_samples as f64 * (1.0 - overlap_frac)).round() as usize;
        if hop_samples == 0 {
            return Err(Error::InvalidConfig("hop rounds to zero samples".into()));
        }
        Ok(Self {
            sample_rate_hz,
            window_ms,
            overlap_frac,
            window_samples,
            hop_samples,
        })
    }

    /// 40 ms Hann window, 50% overlap.
    pub fn standard(sample_rate_hz: u32) -> Result<Self> {
        Self::new(sample_rate_hz, 40.0, 0.5)
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn window_ms(&self) -> f64 {
        self.window_ms
    }

    pub fn overlap_frac(&self) -> f64 {
        self.overlap_frac
    }

    pub fn window_samples(&self) -> usize {
        self.window_samples
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    /// Number of one-sided frequency bins `M`.
    pub fn bins(&self) -> usize {
        self.window_samples / 2 + 1
    }

    /// Frame count for a signal of `len` samples, `None` if shorter than one window.
    pub fn frames_for(&self, len: usize) -> Option<usize> {
        if len < self.window_samples {
            None
        } else {
            Some((len - self.window_samples) / self.hop_samples + 1)
        }
    }

    /// Length of the signal spanned by `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop_samples + self.window_samples
        }
    }

    /// Periodic Hann window.
    pub fn window(&self) -> Vec<f64> {
        let w = self.window_samples as f64;
        (0..self.window_samples)
            .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / w).cos())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ComplexSpectrogram {
    bins: usize,
    frames: usize,
    coeffs: Vec<Complex64>,
    config: AnalysisConfig,
}

impl ComplexSpectrogram {
    pub fn new(
        bins: usize,
        frames: usize,
        coeffs: Vec<Complex64>,
        config: AnalysisConfig,
    ) -> Result<Self> {
        if bins != config.bins() {
            return Err(Error::Shape(format!(
                "{bins} bins, configuration implies {}",
                config.bins()
            )));
        }
        if frames == 0 || coeffs.len() != bins * frames {
            return Err(Error::Shape(format!(
                "{} coefficients for a {bins}x{frames} spectrogram",
                coeffs.len()
            )));
        }
        Ok(Self {
            bins,
            frames,
            coeffs,
            config,
        })
    }

    pub fn zeros(frames: usize, config: AnalysisConfig) -> Result<Self> {
        let bins = config.bins();
        Self::new(bins, frames, vec![Complex64::new(0.0, 0.0); bins * frames], config)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.coeffs[n * self.bins + m]
    }

    pub fn frame(&self, n: usize) -> &[Complex64] {
        &self.coeffs[n * self.bins..(n + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
}

#[derive(Debug, Clone)]
pub struct MagSpectrogram {
    bins: usize,
    frames: usize,
    values: Vec<f64>,
    config: AnalysisConfig,
}

impl MagSpectrogram {
    /// Entries must be finite and nonnegative.
    pub fn new(bins: usize, frames: usize, values: Vec<f64>, config: AnalysisConfig) -> Result<Self> {
        if bins != config.bins() {
            return Err(Error::Shape(format!(
                "{bins} bins, configuration implies {}",
                config.bins()
            )));
        }
        if frames == 0 || values.len() != bins * frames {
            return Err(Error::Shape(format!(
                "{} values for a {bins}x{frames} spectrogram",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMagnitude(k));
        }
        Ok(Self {
            bins,
            frames,
            values,
            config,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[n * self.bins + m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Appends all-zero frames up to `frames` columns.
    pub fn padded_to(&self, frames: usize) -> MagSpectrogram {
        let mut values = self.values.clone();
        values.resize(self.bins * frames.max(self.frames), 0.0);
        MagSpectrogram {
            bins: self.bins,
            frames: frames.max(self.frames),
            values,
            config: self.config.clone(),
        }
    }

    pub(crate) fn scaled(&self, factor: f64) -> MagSpectrogram {
        MagSpectrogram {
            bins: self.bins,
            frames: self.frames,
            values: self.values.iter().map(|v| v * factor).collect(),
            config: self.config.clone(),
        }
    }
}

/// Reusable forward/inverse transform with cached FFT plans.
pub struct Stft {
    config: AnalysisConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(config: &AnalysisConfig) -> Self {
        let mut planner = FftPlanner::new();
        let w = config.window_samples();
        Self {
            config: config.clone(),
            window: config.window(),
            forward: planner.plan_fft_forward(w),
            inverse: planner.plan_fft_inverse(w),
        }
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn forward(&self, signal: &[f64]) -> Result<ComplexSpectrogram> {
        if let Some(k) = signal.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(k));
        }
        let frames = self.config.frames_for(signal.len()).ok_or(Error::SignalTooShort {
            len: signal.len(),
            window: self.config.window_samples(),
        })?;
        let w = self.config.window_samples();
        let hop = self.config.hop_samples();
        let bins = self.config.bins();
        let mut coeffs = Vec::with_capacity(bins * frames);
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        for n in 0..frames {
            let chunk = &signal[n * hop..n * hop + w];
            for ((b, s), win) in buf.iter_mut().zip(chunk).zip(&self.window) {
                *b = Complex64::new(s * win, 0.0);
            }
            self.forward.process(&mut buf);
            coeffs.extend_from_slice(&buf[..bins]);
        }
        ComplexSpectrogram::new(bins, frames, coeffs, self.config.clone())
    }

    pub fn inverse(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        if spec.config() != &self.config {
            return Err(Error::Shape("spectrogram analysed with a different configuration".into()));
        }
        let w = self.config.window_samples();
        let hop = self.config.hop_samples();
        let bins = self.config.bins();
        let len = self.config.signal_len(spec.frames());
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); w];
        let scale = 1.0 / w as f64;
        for n in 0..spec.frames() {
            let frame = spec.frame(n);
            buf[..bins].copy_from_slice(frame);
            for k in bins..w {
                buf[k] = frame[w - k].conj();
            }
            self.inverse.process(&mut buf);
            let start = n * hop;
            for (k, (b, win)) in buf.iter().zip(&self.window).enumerate() {
                out[start + k] += b.re * scale * win;
                norm[start + k] += win * win;
            }
        }
        // samples no window touches carry no information
        for (o, d) in out.iter_mut().zip(&norm) {
            *o = if *d > 1e-10 { *o / d } else { 0.0 };
        }
        Ok(out)
    }
}

pub fn stft(signal: &[f64], config: &AnalysisConfig) -> Result<ComplexSpectrogram> {
    Stft::new(config).forward(signal)
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    Stft::new(spec.config()).inverse(spec)
}

pub fn magnitude(spec: &ComplexSpectrogram) -> MagSpectrogram {
    MagSpectrogram {
        bins: spec.bins,
        frames: spec.frames,
        values: spec.coeffs.iter().map(|c| c.norm()).collect(),
        config: spec.config.clone(),
    }
}

/// Global normalization to unit mass; also returns the original total.
///
/// The distribution lives on a dimensionless grid; use
/// [`TfDistribution::with_mode`] for physical coordinates.
pub fn normalize(spec: &MagSpectrogram) -> Result<(TfDistribution, f64)> {
    let total = spec.total();
    if !(total > 0.0) {
        return Err(Error::SilentInput);
    }
    let grid = TfGrid::from_config(spec.bins, spec.frames, &spec.config, CoordinateMode::Dimensionless)?;
    let x = spec.values.iter().map(|v| v / total).collect();
    Ok((TfDistribution::new(grid, x)?, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> AnalysisConfig {
        // 16-sample window, hop 8 at 1 kHz
        AnalysisConfig::new(1000, 16.0, 0.5).unwrap()
    }

    #[test]
    fn paper_configuration_dimensions() {
        let cfg = AnalysisConfig::standard(16_000).unwrap();
        assert_eq!(cfg.window_samples(), 640);
        assert_eq!(cfg.hop_samples(), 320);
        assert_eq!(cfg.bins(), 321);
        assert_eq!(cfg.frames_for(16_000), Some(49));
        let spec = stft(&vec![0.1; 16_000], &cfg).unwrap();
        assert_eq!((spec.bins(), spec.frames()), (321, 49));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(AnalysisConfig::new(1000, 15.0, 0.5).is_err()); // odd window
        assert!(AnalysisConfig::new(1000, 16.0, 1.0).is_err());
        assert!(AnalysisConfig::new(0, 16.0, 0.5).is_err());
        assert!(AnalysisConfig::new(1000, -1.0, 0.5).is_err());
    }

    #[test]
    fn short_and_invalid_signals() {
        let cfg = small_config();
        assert!(matches!(stft(&[0.0; 15], &cfg), Err(Error::SignalTooShort { .. })));
        let mut y = vec![0.0; 32];
        y[3] = f64::NAN;
        assert!(matches!(stft(&y, &cfg), Err(Error::InvalidSignal(3))));
    }

    #[test]
    fn zero_signal_gives_zero_coefficients() {
        let spec = stft(&[0.0; 64], &small_config()).unwrap();
        assert!(spec.as_slice().iter().all(|c| c.norm() == 0.0));
        let y = istft(&ComplexSpectrogram::zeros(5, small_config()).unwrap()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bin_centre_sinusoid_matches_direct_dft() {
        let cfg = small_config();
        let w = cfg.window_samples();
        let bin = 3;
        let y: Vec<f64> = (0..64)
            .map(|t| (2.0 * PI * bin as f64 * t as f64 / w as f64).cos())
            .collect();
        let spec = stft(&y, &cfg).unwrap();
        let win = cfg.window();
        for n in 0..spec.frames() {
            // direct O(W^2) windowed DFT of the frame
            for m in 0..cfg.bins() {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..w {
                    let ang = -2.0 * PI * (m * k) as f64 / w as f64;
                    acc += Complex64::from_polar(y[n * cfg.hop_samples() + k] * win[k], ang);
                }
                assert_abs_diff_eq!(spec.get(m, n).re, acc.re, epsilon = 1e-10);
                assert_abs_diff_eq!(spec.get(m, n).im, acc.im, epsilon = 1e-10);
            }
            let peak = (0..cfg.bins())
                .max_by(|a, b| spec.get(*a, n).norm().total_cmp(&spec.get(*b, n).norm()))
                .unwrap();
            assert_eq!(peak, bin);
        }
    }

    #[test]
    fn single_frame_inverse_matches_direct_idft() {
        let cfg = small_config();
        let w = cfg.window_samples();
        let win = cfg.window();
        let frame: Vec<f64> = (0..w).map(|k| (0.7 * k as f64).sin() * win[k]).collect();
        let coeffs: Vec<Complex64> = (0..cfg.bins())
            .map(|m| {
                (0..w)
                    .map(|k| Complex64::from_polar(frame[k], -2.0 * PI * (m * k) as f64 / w as f64))
                    .sum()
            })
            .collect();
        let spec = ComplexSpectrogram::new(cfg.bins(), 1, coeffs.clone(), cfg.clone()).unwrap();
        let y = istft(&spec).unwrap();
        for k in 1..w {
            // direct inverse DFT with Hermitian completion
            let mut acc = coeffs[0].re;
            for m in 1..cfg.bins() {
                let weight = if m == w / 2 { 1.0 } else { 2.0 };
                acc += weight * (coeffs[m] * Complex64::from_polar(1.0, 2.0 * PI * (m * k) as f64 / w as f64)).re;
            }
            let windowed = acc / w as f64;
            // single frame: istft divides win * frame by win^2
            assert_abs_diff_eq!(y[k], windowed / win[k], epsilon = 1e-9);
            assert_abs_diff_eq!(y[k] * win[k], frame[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_interior() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y: Vec<f64> = (0..200).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = istft(&stft(&y, &cfg).unwrap()).unwrap();
        let hop = cfg.hop_samples();
        let end = back.len() - hop;
        let err: f64 = (hop..end).map(|k| (back[k] - y[k]).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = (hop..end).map(|k| y[k].powi(2)).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn magnitude_entrywise() {
        let cfg = AnalysisConfig::new(4, 1000.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let coeffs: Vec<Complex64> = (0..cfg.bins() * 4)
            .map(|_| Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
            .collect();
        let mut spec = ComplexSpectrogram::new(cfg.bins(), 4, coeffs, cfg).unwrap();
        spec.as_mut_slice()[0] = Complex64::new(3.0, 4.0);
        let mag = magnitude(&spec);
        assert_eq!(mag.as_slice()[0], 5.0);
        for (c, v) in spec.as_slice().iter().zip(mag.as_slice()) {
            assert_abs_diff_eq!(*v, (c.re * c.re + c.im * c.im).sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_examples() {
        let cfg = AnalysisConfig::new(4, 1000.0, 0.5).unwrap(); // 4-sample window, 3 bins
        let x = MagSpectrogram::new(3, 1, vec![1.0, 0.0, 3.0], cfg.clone()).unwrap();
        let (dist, total) = normalize(&x).unwrap();
        assert_eq!(total, 4.0);
        assert_eq!(dist.masses(), &[0.25, 0.0, 0.75]);

        let already = MagSpectrogram::new(3, 1, vec![0.25, 0.0, 0.75], cfg.clone()).unwrap();
        let (dist2, total2) = normalize(&already).unwrap();
        assert_eq!(total2, 1.0);
        assert_eq!(dist2.masses(), dist.masses());

        let silent = MagSpectrogram::new(3, 1, vec![0.0; 3], cfg.clone()).unwrap();
        assert!(matches!(normalize(&silent), Err(Error::SilentInput)));
        assert!(MagSpectrogram::new(3, 1, vec![0.0, -1.0, 0.0], cfg).is_err());
    }

    #[test]
    fn padding_appends_empty_frames() {
        let cfg = AnalysisConfig::new(4, 1000.0, 0.5).unwrap();
        let x = MagSpectrogram::new(3, 1, vec![1.0, 2.0, 3.0], cfg).unwrap();
        let p = x.padded_to(3);
        assert_eq!(p.frames(), 3);
        assert_eq!(p.as_slice(), &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
