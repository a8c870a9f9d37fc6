//! Audio interpolation by optimal transport of magnitude spectrograms.
//!
//! Two signals are analysed with a short-time Fourier transform, their
//! normalized magnitude spectrograms are matched by a (possibly unbalanced)
//! transport plan confined to a band of frames, the displacement interpolant
//! of that plan is reassigned to the grid and rescaled, and a waveform is
//! recovered with Griffin-Lim.

mod error;

pub mod analysis;
pub mod barycenter;
pub mod exact;
pub mod phase;
pub mod transport;
pub mod uot;

pub use error::{Error, Result};
