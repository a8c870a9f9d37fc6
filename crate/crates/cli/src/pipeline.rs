//! End-to-end interpolation: decode, analyse, transport, reassign, restore,
//! reconstruct, encode.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use specmorph::analysis::{istft, magnitude, normalize, stft, AnalysisConfig, MagSpectrogram};
use specmorph::barycenter::{displacement_interpolate, euclidean_interpolate, reassign_plan, restore_amplitude, PointMassCloud};
use specmorph::exact::solve_ot;
use specmorph::phase::{griffin_lim_with, GriffinLimParams};
use specmorph::transport::{Band, BandedCost, CoordinateMode, TfDistribution, TransportPlan};
use specmorph::uot::{IterationRecord, UotParams, UotSolver};

use crate::error::{CliError, Result};
use crate::export::{export_spectrograms, Telemetry};
use crate::wav::{read_wav, write_wav};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Sample-wise average of the waveforms.
    Euclidean,
    /// Exact balanced transport.
    Ot,
    /// Unbalanced transport with KL marginal penalties.
    Uot,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euclidean" => Ok(Method::Euclidean),
            "ot" => Ok(Method::Ot),
            "uot" => Ok(Method::Uot),
            other => Err(format!("unknown method `{other}`, expected euclidean, ot or uot")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Euclidean => "euclidean",
            Method::Ot => "ot",
            Method::Uot => "uot",
        })
    }
}

/// Everything that determines the spectral interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSettings {
    pub method: Method,
    pub band: Band,
    pub beta: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub coordinates: CoordinateMode,
    pub window_ms: f64,
    pub overlap_frac: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        let uot = UotParams::default();
        Self {
            method: Method::Uot,
            band: Band::Limited(0),
            beta: uot.beta,
            rel_tol: uot.rel_tol,
            max_iters: uot.max_iters,
            coordinates: CoordinateMode::Dimensionless,
            window_ms: 40.0,
            overlap_frac: 0.5,
        }
    }
}

impl SpectralSettings {
    pub fn uot_params(&self) -> UotParams {
        UotParams {
            beta: self.beta,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            ..UotParams::default()
        }
    }

    pub fn analysis(&self, sample_rate: u32) -> Result<AnalysisConfig> {
        Ok(AnalysisConfig::new(sample_rate, self.window_ms, self.overlap_frac)?)
    }

    fn validate(&self) -> Result<()> {
        if self.method == Method::Uot {
            self.uot_params().validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source_path: PathBuf,
    pub target_path: PathBuf,
    pub output_path: PathBuf,
    pub alpha: f64,
    pub spectral: SpectralSettings,
    pub griffin_lim: GriffinLimParams,
    /// Directory for source/target/interpolant CSV and PNG dumps.
    pub export_spectrograms: Option<PathBuf>,
    pub export_plan: Option<PathBuf>,
    pub export_cloud: Option<PathBuf>,
    pub telemetry: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(source: impl Into<PathBuf>, target: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            source_path: source.into(),
            target_path: target.into(),
            output_path: output.into(),
            alpha: 0.5,
            spectral: SpectralSettings::default(),
            griffin_lim: GriffinLimParams::default(),
            export_spectrograms: None,
            export_plan: None,
            export_cloud: None,
            telemetry: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(specmorph::Error::InvalidAlpha(self.alpha).into());
        }
        if self.griffin_lim.iterations == 0 {
            return Err(CliError::Config("--gl-iters must be at least 1".into()));
        }
        let transport = matches!(self.spectral.method, Method::Ot | Method::Uot);
        if !transport && (self.export_plan.is_some() || self.export_cloud.is_some()) {
            return Err(CliError::Config("plan and cloud exports need --method ot or uot".into()));
        }
        self.spectral.validate()
    }
}

/// One side of the interpolation after analysis.
#[derive(Debug, Clone)]
struct Side {
    /// Magnitude spectrogram padded to the common frame count.
    mag: MagSpectrogram,
    dist: TfDistribution,
    mass: f64,
}

impl Side {
    fn analyse(signal: &[f64], config: &AnalysisConfig) -> Result<MagSpectrogram> {
        Ok(magnitude(&stft(signal, config)?))
    }

    fn new(mag: MagSpectrogram, frames: usize, coordinates: CoordinateMode) -> Result<Self> {
        let mag = mag.padded_to(frames);
        let (dist, mass) = normalize(&mag)?;
        Ok(Self {
            dist: dist.with_mode(coordinates)?,
            mag,
            mass,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UotSummary {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub residual: f64,
}

/// Solves the transport problem once and renders interpolants for any alpha
/// from the same plan.
#[derive(Debug)]
pub struct Interpolator {
    analysis: AnalysisConfig,
    source: Side,
    target: Side,
    plan: TransportPlan,
    uot: Option<UotSummary>,
    solves: usize,
}

impl Interpolator {
    pub fn new(source: &[f64], target: &[f64], sample_rate: u32, settings: &SpectralSettings) -> Result<Self> {
        Self::with_observer(source, target, sample_rate, settings, None)
    }

    /// As [`Interpolator::new`], reporting every UOT iteration.
    pub fn with_observer(
        source: &[f64],
        target: &[f64],
        sample_rate: u32,
        settings: &SpectralSettings,
        observer: Option<&mut dyn FnMut(&IterationRecord)>,
    ) -> Result<Self> {
        settings.validate()?;
        let analysis = settings.analysis(sample_rate)?;
        let ms = Side::analyse(source, &analysis)?;
        let mt = Side::analyse(target, &analysis)?;
        let frames = ms.frames().max(mt.frames());
        if ms.frames() != mt.frames() {
            log::info!(
                "padding to {frames} frames ({} source, {} target)",
                ms.frames(),
                mt.frames()
            );
        }
        let source = Side::new(ms, frames, settings.coordinates)?;
        let target = Side::new(mt, frames, settings.coordinates)?;
        let cost = BandedCost::new(source.dist.grid(), settings.band);
        log::info!(
            "{} on {}x{} grid, band {}, {} stored cost entries",
            settings.method,
            cost.grid().bins(),
            cost.grid().frames(),
            settings.band,
            cost.stored_entries()
        );

        let (plan, uot) = match settings.method {
            Method::Ot => (solve_ot(&source.dist, &target.dist, &cost)?, None),
            Method::Uot => {
                let mut solver = UotSolver::new(settings.uot_params());
                if let Some(f) = observer {
                    solver = solver.with_observer(f);
                }
                let sol = solver.solve(&source.dist, &target.dist, &cost)?;
                let summary = UotSummary {
                    iterations: sol.iterations,
                    converged: sol.converged,
                    objective: sol.objective,
                    residual: sol.residual,
                };
                log::info!(
                    "UOT: {} iterations, objective {:e}, transported mass {:e}",
                    sol.iterations,
                    sol.objective,
                    sol.plan.total_mass()
                );
                (sol.plan, Some(summary))
            }
            Method::Euclidean => {
                return Err(CliError::Config("the euclidean method has no transport plan".into()));
            }
        };
        Ok(Self {
            analysis,
            source,
            target,
            plan,
            uot,
            solves: 1,
        })
    }

    pub fn analysis(&self) -> &AnalysisConfig {
        &self.analysis
    }

    pub fn plan(&self) -> &TransportPlan {
        &self.plan
    }

    pub fn uot_summary(&self) -> Option<UotSummary> {
        self.uot
    }

    /// Transport solves performed so far. Rendering never adds to this.
    pub fn solver_invocations(&self) -> usize {
        self.solves
    }

    pub fn source_spectrogram(&self) -> &MagSpectrogram {
        &self.source.mag
    }

    pub fn target_spectrogram(&self) -> &MagSpectrogram {
        &self.target.mag
    }

    pub fn source_distribution(&self) -> &TfDistribution {
        &self.source.dist
    }

    pub fn target_distribution(&self) -> &TfDistribution {
        &self.target.dist
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.source.mass, self.target.mass)
    }

    pub fn cloud(&self, alpha: f64) -> Result<PointMassCloud> {
        Ok(displacement_interpolate(&self.plan, self.source.dist.grid(), alpha)?)
    }

    /// Plan mass reassigned to the grid, before amplitude restoration.
    pub fn reassigned(&self, alpha: f64) -> Result<TfDistribution> {
        Ok(reassign_plan(&self.plan, self.source.dist.grid(), alpha)?)
    }

    /// Interpolated magnitude spectrogram at the restored amplitude.
    pub fn spectrogram(&self, alpha: f64) -> Result<MagSpectrogram> {
        let x = self.reassigned(alpha)?;
        let frames = x.grid().frames();
        let mag = MagSpectrogram::new(self.analysis.bins(), frames, x.masses().to_vec(), self.analysis.clone())?;
        Ok(restore_amplitude(&mag, self.source.mass, self.target.mass, alpha)?)
    }
}

pub struct Inputs {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub sample_rate: u32,
}

pub fn load_inputs(source: &Path, target: &Path) -> Result<Inputs> {
    let (source, rs) = read_wav(source)?;
    let (target, rt) = read_wav(target)?;
    if rs != rt {
        return Err(CliError::SampleRateMismatch {
            source_rate: rs,
            target_rate: rt,
        });
    }
    Ok(Inputs {
        source,
        target,
        sample_rate: rs,
    })
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub output_samples: usize,
    pub sample_rate: u32,
    pub clipped_samples: usize,
    pub uot: Option<UotSummary>,
    /// Consistency error after the last Griffin-Lim iteration.
    pub final_consistency_error: Option<f64>,
    pub exported: Vec<PathBuf>,
}

fn padded(signal: &[f64], len: usize) -> Vec<f64> {
    let mut out = signal.to_vec();
    out.resize(len, 0.0);
    out
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    let inputs = load_inputs(&config.source_path, &config.target_path)?;
    let mut telemetry = config.telemetry.as_deref().map(Telemetry::create).transpose()?;
    let mut exported = Vec::new();
    let spectral = &config.spectral;

    let (signal, uot, final_error, spectrograms) = if spectral.method == Method::Euclidean {
        let len = inputs.source.len().max(inputs.target.len());
        let ys = padded(&inputs.source, len);
        let yt = padded(&inputs.target, len);
        let y = euclidean_interpolate(&ys, &yt, config.alpha)?;
        let spectrograms = match &config.export_spectrograms {
            Some(_) => {
                let analysis = spectral.analysis(inputs.sample_rate)?;
                let mags = [&ys, &yt, &y].map(|s| Side::analyse(s, &analysis));
                let [a, b, c] = mags;
                Some((a?, b?, c?))
            }
            None => None,
        };
        (y, None, None, spectrograms)
    } else {
        let interp = {
            let mut observe = |r: &IterationRecord| {
                if let Some(t) = telemetry.as_mut() {
                    t.uot(r)
                }
            };
            let observer: Option<&mut dyn FnMut(&IterationRecord)> =
                if config.telemetry.is_some() { Some(&mut observe) } else { None };
            Interpolator::with_observer(&inputs.source, &inputs.target, inputs.sample_rate, spectral, observer)?
        };
        if let Some(path) = &config.export_plan {
            let out = File::create(path).map_err(CliError::io(path))?;
            interp.plan().write_triplets(BufWriter::new(out)).map_err(CliError::io(path))?;
            exported.push(path.clone());
        }
        if let Some(path) = &config.export_cloud {
            let out = File::create(path).map_err(CliError::io(path))?;
            interp.cloud(config.alpha)?.write_csv(BufWriter::new(out)).map_err(CliError::io(path))?;
            exported.push(path.clone());
        }
        let x = interp.spectrogram(config.alpha)?;
        let mut last = None;
        let s = griffin_lim_with(&x, &config.griffin_lim, |it, err| {
            last = Some(err);
            if let Some(t) = telemetry.as_mut() {
                t.griffin_lim(it, err)
            }
        })?;
        let y = istft(&s)?;
        let spectrograms = config
            .export_spectrograms
            .as_ref()
            .map(|_| (interp.source_spectrogram().clone(), interp.target_spectrogram().clone(), x));
        (y, interp.uot_summary(), last, spectrograms)
    };

    let clipped = write_wav(&config.output_path, &signal, inputs.sample_rate)?;
    if let (Some(dir), Some((s, t, x))) = (&config.export_spectrograms, spectrograms) {
        exported.extend(export_spectrograms(dir, &s, &t, &x)?);
    }
    if let (Some(t), Some(path)) = (telemetry, &config.telemetry) {
        t.finish()?;
        exported.push(path.clone());
    }
    Ok(PipelineReport {
        output_samples: signal.len(),
        sample_rate: inputs.sample_rate,
        clipped_samples: clipped,
        uot,
        final_consistency_error: final_error,
        exported,
    })
}
