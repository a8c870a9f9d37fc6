//! Pipeline driver behind the `specmorph` command.

mod error;
pub mod export;
pub mod pipeline;
pub mod wav;

pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, Interpolator, Method, PipelineConfig, PipelineReport, SpectralSettings};
