//! Spectrogram CSV and PNG dumps, plan and cloud dumps, telemetry.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use specmorph::analysis::MagSpectrogram;
use specmorph::uot::IterationRecord;

use crate::error::{CliError, Result};

/// Display floor below the panel maximum.
pub const IMAGE_FLOOR_DB: f64 = 80.0;

/// Pixels between stacked panels.
const PANEL_GAP: u32 = 4;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

/// `m,n,value` rows, one-based indices, linear magnitude.
pub fn write_spectrogram_csv(path: &Path, spec: &MagSpectrogram) -> Result<()> {
    let mut out = create(path)?;
    let io = CliError::io(path);
    (|| {
        writeln!(out, "m,n,value")?;
        for n in 0..spec.frames() {
            for m in 0..spec.bins() {
                writeln!(out, "{},{},{:.16e}", m + 1, n + 1, spec.get(m, n))?;
            }
        }
        out.flush()
    })()
    .map_err(io)
}

/// Parsed spectrogram dump: `(bins, frames, values)` in frame-major order.
pub fn read_spectrogram_csv(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let bad = |line: usize, msg: &str| CliError::Config(format!("{}:{line}: {msg}", path.display()));
    let mut cells = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if k == 0 {
            if line != "m,n,value" {
                return Err(bad(1, "expected header m,n,value"));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(k + 1, "expected three fields"));
        }
        let m: usize = fields[0].parse().map_err(|_| bad(k + 1, "bad bin index"))?;
        let n: usize = fields[1].parse().map_err(|_| bad(k + 1, "bad frame index"))?;
        let v: f64 = fields[2].parse().map_err(|_| bad(k + 1, "bad value"))?;
        if m == 0 || n == 0 {
            return Err(bad(k + 1, "indices are one-based"));
        }
        cells.push((m - 1, n - 1, v));
    }
    let bins = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let frames = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    if cells.len() != bins * frames {
        return Err(bad(0, "incomplete grid"));
    }
    let mut values = vec![f64::NAN; bins * frames];
    for (m, n, v) in cells {
        values[n * bins + m] = v;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(bad(0, "duplicate cells"));
    }
    Ok((bins, frames, values))
}

/// Grayscale log-magnitude image: frames left to right, low frequencies at
/// the bottom, black at the floor.
fn render(spec: &MagSpectrogram) -> GrayImage {
    let (w, h) = (spec.frames() as u32, spec.bins() as u32);
    let peak = spec.as_slice().iter().copied().fold(0.0, f64::max);
    GrayImage::from_fn(w, h, |x, y| {
        let v = spec.get((h - 1 - y) as usize, x as usize);
        let level = if peak > 0.0 && v > 0.0 {
            let db = (20.0 * (v / peak).log10()).max(-IMAGE_FLOOR_DB);
            (db + IMAGE_FLOOR_DB) / IMAGE_FLOOR_DB
        } else {
            0.0
        };
        Luma([(level * 255.0).round() as u8])
    })
}

fn save(path: &Path, img: &GrayImage) -> Result<()> {
    img.save(path).map_err(|e| CliError::Image {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub fn write_spectrogram_png(path: &Path, spec: &MagSpectrogram) -> Result<()> {
    save(path, &render(spec))
}

/// Panels side by side in the given order, separated by white gaps.
pub fn write_panels_png(path: &Path, specs: &[&MagSpectrogram]) -> Result<()> {
    let panels: Vec<GrayImage> = specs.iter().map(|s| render(s)).collect();
    let height = panels.iter().map(|p| p.height()).max().unwrap_or(0);
    let width = panels.iter().map(|p| p.width()).sum::<u32>() + PANEL_GAP * panels.len().saturating_sub(1) as u32;
    let mut canvas = GrayImage::from_pixel(width, height, Luma([255]));
    let mut x0 = 0;
    for p in &panels {
        image::imageops::replace(&mut canvas, p, x0 as i64, (height - p.height()) as i64);
        x0 += p.width() + PANEL_GAP;
    }
    save(path, &canvas)
}

/// Writes `source`, `target` and `interpolant` CSV and PNG files plus a
/// combined `panels.png` into `dir`.
pub fn export_spectrograms(
    dir: &Path,
    source: &MagSpectrogram,
    target: &MagSpectrogram,
    interpolant: &MagSpectrogram,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut written = Vec::new();
    for (name, spec) in [("source", source), ("target", target), ("interpolant", interpolant)] {
        let csv = dir.join(format!("{name}.csv"));
        write_spectrogram_csv(&csv, spec)?;
        let png = dir.join(format!("{name}.png"));
        write_spectrogram_png(&png, spec)?;
        written.extend([csv, png]);
    }
    let panels = dir.join("panels.png");
    write_panels_png(&panels, &[source, target, interpolant])?;
    written.push(panels);
    Ok(written)
}

/// Per-iteration solver and phase-reconstruction telemetry as CSV.
pub struct Telemetry {
    path: PathBuf,
    out: BufWriter<File>,
    failed: Option<std::io::Error>,
}

impl Telemetry {
    pub const HEADER: &'static str = "stage,iteration,objective,source_l1,target_l1,residual,consistency_error";

    pub fn create(path: &Path) -> Result<Self> {
        let mut out = create(path)?;
        writeln!(out, "{}", Self::HEADER).map_err(CliError::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            failed: None,
        })
    }

    fn line(&mut self, args: std::fmt::Arguments) {
        if self.failed.is_none() {
            if let Err(e) = self.out.write_fmt(args) {
                self.failed = Some(e);
            }
        }
    }

    pub fn uot(&mut self, r: &IterationRecord) {
        log::trace!("uot {}: objective {:e}, residual {:e}", r.iteration, r.objective, r.residual);
        self.line(format_args!(
            "uot,{},{:.16e},{:.16e},{:.16e},{:.16e},\n",
            r.iteration, r.objective, r.source_l1, r.target_l1, r.residual
        ));
    }

    pub fn griffin_lim(&mut self, iteration: usize, error: f64) {
        log::trace!("griffin-lim {iteration}: consistency error {error:e}");
        self.line(format_args!("griffin_lim,{iteration},,,,,{error:.16e}\n"));
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.failed.take() {
            return Err(CliError::Io { path: self.path, source: e });
        }
        self.out.flush().map_err(CliError::io(&self.path))
    }
}
