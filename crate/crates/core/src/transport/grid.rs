use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};

/// How grid points are embedded in the plane for the transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordinateMode {
    /// Physical units: hertz along frequency, seconds along time.
    Physical,
    /// Bin and frame indices.
    #[default]
    Dimensionless,
}

/// Regular `bins x frames` time-frequency lattice.
///
/// Point `(m, n)` (zero-based) has flat index `i = n * bins + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    bins: usize,
    frames: usize,
    sample_rate_hz: u32,
    hop_samples: usize,
    mode: CoordinateMode,
}

impl TfGrid {
    pub fn new(
        bins: usize,
        frames: usize,
        sample_rate_hz: u32,
        hop_samples: usize,
        mode: CoordinateMode,
    ) -> Result<Self> {
        if bins == 0 || frames == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least one bin and one frame, got {bins}x{frames}"
            )));
        }
        if mode == CoordinateMode::Physical && (sample_rate_hz == 0 || hop_samples == 0) {
            return Err(Error::InvalidParameter(
                "physical coordinates need a positive sample rate and hop".into(),
            ));
        }
        Ok(Self {
            bins,
            frames,
            sample_rate_hz,
            hop_samples,
            mode,
        })
    }

    /// Dimensionless grid with no physical metadata; handy for small problems.
    pub fn dimensionless(bins: usize, frames: usize) -> Result<Self> {
        Self::new(bins, frames, 0, 0, CoordinateMode::Dimensionless)
    }

    pub fn from_config(
        bins: usize,
        frames: usize,
        config: &AnalysisConfig,
        mode: CoordinateMode,
    ) -> Result<Self> {
        Self::new(bins, frames, config.sample_rate_hz(), config.hop_samples(), mode)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// Number of points `I = bins * frames`.
    pub fn len(&self) -> usize {
        self.bins * self.frames
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode(&self) -> CoordinateMode {
        self.mode
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn hop_samples(&self) -> usize {
        self.hop_samples
    }

    pub fn with_mode(&self, mode: CoordinateMode) -> Result<Self> {
        Self::new(self.bins, self.frames, self.sample_rate_hz, self.hop_samples, mode)
    }

    /// Same lattice shape, ignoring coordinate metadata.
    pub fn same_shape(&self, other: &TfGrid) -> bool {
        self.bins == other.bins && self.frames == other.frames
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        debug_assert!(m < self.bins && n < self.frames);
        n * self.bins + m
    }

    pub fn point(&self, i: usize) -> (usize, usize) {
        (i % self.bins, i / self.bins)
    }

    /// Spacing between adjacent frequency bins.
    pub fn freq_step(&self) -> f64 {
        match self.mode {
            CoordinateMode::Dimensionless => 1.0,
            CoordinateMode::Physical => self.sample_rate_hz as f64 / (2.0 * self.bins as f64),
        }
    }

    /// Spacing between adjacent frames.
    pub fn time_step(&self) -> f64 {
        match self.mode {
            CoordinateMode::Dimensionless => 1.0,
            CoordinateMode::Physical => self.hop_samples as f64 / self.sample_rate_hz as f64,
        }
    }

    /// Frequency coordinate of zero-based bin `m`.
    pub fn freq(&self, m: usize) -> f64 {
        match self.mode {
            // the first bin sits at 1, matching one-based bin numbering
            CoordinateMode::Dimensionless => (m + 1) as f64,
            CoordinateMode::Physical => m as f64 * self.freq_step(),
        }
    }

    /// Time coordinate of zero-based frame `n`.
    pub fn time(&self, n: usize) -> f64 {
        match self.mode {
            CoordinateMode::Dimensionless => (n + 1) as f64,
            CoordinateMode::Physical => n as f64 * self.time_step(),
        }
    }

    /// Coordinates `(f, t)` of flat index `i`.
    pub fn coords(&self, i: usize) -> (f64, f64) {
        let (m, n) = self.point(i);
        (self.freq(m), self.time(n))
    }
}

/// Nonnegative mass vector over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TfDistribution {
    grid: TfGrid,
    x: Vec<f64>,
}

impl TfDistribution {
    pub fn new(grid: TfGrid, x: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} masses for a grid of {} points",
                x.len(),
                grid.len()
            )));
        }
        if let Some(k) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidMagnitude(k));
        }
        Ok(Self { grid, x })
    }

    pub fn grid(&self) -> &TfGrid {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.x
    }

    pub fn total(&self) -> f64 {
        self.x.iter().sum()
    }

    pub fn with_mode(&self, mode: CoordinateMode) -> Result<Self> {
        Ok(Self {
            grid: self.grid.with_mode(mode)?,
            x: self.x.clone(),
        })
    }

    /// Appends empty frames up to `frames`.
    pub fn padded_to(&self, frames: usize) -> Result<Self> {
        let frames = frames.max(self.grid.frames);
        let grid = TfGrid { frames, ..self.grid.clone() };
        let mut x = self.x.clone();
        x.resize(grid.len(), 0.0);
        Ok(Self { grid, x })
    }
}
