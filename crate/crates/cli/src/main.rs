use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use specmorph::phase::{GriffinLimParams, PhaseInit};
use specmorph::transport::{Band, CoordinateMode};
use specmorph_cli::{run_pipeline, Method, PipelineConfig, SpectralSettings};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Coordinates {
    Dimensionless,
    Physical,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Zero,
    Random,
}

/// Interpolate between two mono recordings by optimal transport of their
/// spectrograms.
#[derive(Debug, Parser)]
#[command(name = "specmorph", version)]
struct Args {
    /// Source WAV (mono, 16-bit PCM or 32-bit float)
    source: PathBuf,
    /// Target WAV, same sample rate as the source
    target: PathBuf,
    /// Output WAV, written as 16-bit PCM
    output: PathBuf,

    /// Interpolation parameter: 0 gives the source, 1 the target
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// euclidean, ot or uot
    #[arg(long, default_value = "uot")]
    method: Method,
    /// Largest frame displacement allowed, or `inf` for none
    #[arg(long, default_value = "0")]
    p: Band,
    /// KL penalty weight (uot only)
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 40.0)]
    window_ms: f64,
    /// Fraction of the window shared by consecutive frames
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long, default_value_t = 100)]
    gl_iters: usize,
    #[arg(long, value_enum, default_value_t = Init::Zero)]
    gl_init: Init,
    /// Seed for --gl-init random
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// UOT stops when the relative objective change falls below this
    #[arg(long, default_value_t = 1e-7)]
    rel_tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Units of the transport cost
    #[arg(long, value_enum, default_value_t = Coordinates::Dimensionless)]
    coordinates: Coordinates,

    /// Directory for source/target/interpolant spectrograms (CSV and PNG)
    #[arg(long, value_name = "DIR")]
    export_spectrograms: Option<PathBuf>,
    /// Transport plan as `i i' mass` lines
    #[arg(long, value_name = "FILE")]
    export_plan: Option<PathBuf>,
    /// Off-grid barycenter point masses as `f,t,mass` CSV
    #[arg(long, value_name = "FILE")]
    export_cloud: Option<PathBuf>,
    /// Per-iteration UOT and Griffin-Lim diagnostics as CSV
    #[arg(long, value_name = "FILE")]
    telemetry: Option<PathBuf>,
}

impl Args {
    fn into_config(self) -> PipelineConfig {
        if self.beta.is_some() && self.method != Method::Uot {
            log::warn!("--beta only affects --method uot; ignored");
        }
        let defaults = SpectralSettings::default();
        PipelineConfig {
            alpha: self.alpha,
            spectral: SpectralSettings {
                method: self.method,
                band: self.p,
                beta: self.beta.unwrap_or(defaults.beta),
                rel_tol: self.rel_tol,
                max_iters: self.max_iters,
                coordinates: match self.coordinates {
                    Coordinates::Dimensionless => CoordinateMode::Dimensionless,
                    Coordinates::Physical => CoordinateMode::Physical,
                },
                window_ms: self.window_ms,
                overlap_frac: self.overlap,
            },
            griffin_lim: GriffinLimParams {
                iterations: self.gl_iters,
                init: match self.gl_init {
                    Init::Zero => PhaseInit::Zero,
                    Init::Random => PhaseInit::Random,
                },
                seed: self.seed,
            },
            export_spectrograms: self.export_spectrograms,
            export_plan: self.export_plan,
            export_cloud: self.export_cloud,
            telemetry: self.telemetry,
            ..PipelineConfig::new(self.source, self.target, self.output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let config = Args::parse().into_config();
    match run_pipeline(&config) {
        Ok(report) => {
            println!(
                "wrote {} ({} samples at {} Hz)",
                config.output_path.display(),
                report.output_samples,
                report.sample_rate
            );
            if let Some(u) = report.uot {
                println!(
                    "uot: {} iterations{}, objective {:.6e}",
                    u.iterations,
                    if u.converged { "" } else { " (not converged)" },
                    u.objective
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
