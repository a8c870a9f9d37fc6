//! Griffin-Lim phase reconstruction.
//!
//! Errors are measured in the norm of the full two-sided spectrum: interior
//! bins count twice, DC and Nyquist once. In that norm `stft(istft(.))` is an
//! orthogonal projection onto consistent spectrograms and magnitude
//! substitution is a projection onto the magnitude set, so the error can only
//! go down from one iteration to the next.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::analysis::{ComplexSpectrogram, MagSpectrogram, Stft};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseInit {
    #[default]
    Zero,
    /// Uniform phases drawn from a seeded ChaCha8 stream.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GriffinLimParams {
    pub iterations: usize,
    pub init: PhaseInit,
    pub seed: u64,
}

impl Default for GriffinLimParams {
    fn default() -> Self {
        Self {
            iterations: 100,
            init: PhaseInit::Zero,
            seed: 0,
        }
    }
}

/// Weight of bin `m` in the two-sided norm.
fn bin_weight(m: usize, bins: usize) -> f64 {
    if m == 0 || m + 1 == bins {
        1.0
    } else {
        2.0
    }
}

fn weighted_norm_sq(values: impl Iterator<Item = f64>, bins: usize) -> f64 {
    values.enumerate().map(|(k, v)| bin_weight(k % bins, bins) * v * v).sum()
}

fn check_shapes(x: &MagSpectrogram, s: &ComplexSpectrogram) -> Result<()> {
    if x.bins() != s.bins() || x.frames() != s.frames() || x.config() != s.config() {
        return Err(Error::Shape(format!(
            "magnitude is {}x{}, complex spectrogram is {}x{}",
            x.bins(),
            x.frames(),
            s.bins(),
            s.frames()
        )));
    }
    Ok(())
}

/// `|| |T| - X || / ||X||` for a re-analysed spectrogram `T`.
fn relative_error(x: &MagSpectrogram, t: &ComplexSpectrogram, x_norm: f64) -> f64 {
    let bins = x.bins();
    let diff = t.as_slice().iter().zip(x.as_slice()).map(|(c, &v)| c.norm() - v);
    weighted_norm_sq(diff, bins).sqrt() / x_norm
}

/// `|| |stft(istft(S))| - X ||_F / ||X||_F` in the two-sided norm.
pub fn consistency_error(x: &MagSpectrogram, s: &ComplexSpectrogram) -> Result<f64> {
    check_shapes(x, s)?;
    let x_norm = weighted_norm_sq(x.as_slice().iter().copied(), x.bins()).sqrt();
    if !(x_norm > 0.0) {
        return Err(Error::ZeroMass);
    }
    let stft = Stft::new(x.config());
    let t = stft.forward(&stft.inverse(s)?)?;
    Ok(relative_error(x, &t, x_norm))
}

/// `X e^{j angle(c)}`, with phase zero where `c` vanishes.
fn with_phase(x: f64, c: Complex64) -> Complex64 {
    let r = c.norm();
    if r > 0.0 {
        c * (x / r)
    } else {
        Complex64::new(x, 0.0)
    }
}

pub fn griffin_lim(x: &MagSpectrogram, params: &GriffinLimParams) -> Result<ComplexSpectrogram> {
    griffin_lim_with(x, params, |_, _| {})
}

/// Griffin-Lim reporting `(iteration, consistency error)` after each
/// projection; iterations count from 1.
pub fn griffin_lim_with(
    x: &MagSpectrogram,
    params: &GriffinLimParams,
    mut on_iteration: impl FnMut(usize, f64),
) -> Result<ComplexSpectrogram> {
    if params.iterations == 0 {
        return Err(Error::InvalidParameter("Griffin-Lim needs at least one iteration".into()));
    }
    if let Some(k) = x.as_slice().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidMagnitude(k));
    }
    let config = x.config().clone();
    let coeffs: Vec<Complex64> = match params.init {
        PhaseInit::Zero => x.as_slice().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        PhaseInit::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            x.as_slice().iter().map(|&v| Complex64::from_polar(v, rng.gen::<f64>() * TAU)).collect()
        }
    };
    let mut s = ComplexSpectrogram::new(x.bins(), x.frames(), coeffs, config.clone())?;
    let x_norm = weighted_norm_sq(x.as_slice().iter().copied(), x.bins()).sqrt();
    if x_norm == 0.0 {
        for it in 1..=params.iterations {
            on_iteration(it, 0.0);
        }
        return Ok(s);
    }

    let stft = Stft::new(&config);
    for it in 1..=params.iterations {
        let t = stft.forward(&stft.inverse(&s)?)?;
        on_iteration(it, relative_error(x, &t, x_norm));
        for ((c, &v), tc) in s.as_mut_slice().iter_mut().zip(x.as_slice()).zip(t.as_slice()) {
            *c = with_phase(v, *tc);
        }
    }
    Ok(s)
}
