//! Displacement interpolation of a transport plan, reassignment of the
//! resulting point masses to the native grid, amplitude restoration, and the
//! sample-wise baseline.

use std::io::Write;

use crate::analysis::MagSpectrogram;
use crate::error::{Error, Result};
use crate::transport::{TfDistribution, TfGrid, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub f: f64,
    pub t: f64,
    pub mass: f64,
}

/// Point masses at off-grid locations, with the grid they came from.
#[derive(Debug, Clone)]
pub struct PointMassCloud {
    grid: TfGrid,
    points: Vec<PointMass>,
}

impl PointMassCloud {
    pub fn grid(&self) -> &TfGrid {
        &self.grid
    }

    pub fn points(&self) -> &[PointMass] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.mass).sum()
    }

    /// `f,t,mass` rows in grid coordinates.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "f,t,mass")?;
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", p.f, p.t, p.mass)?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

fn check_grid(plan: &TransportPlan, grid: &TfGrid) -> Result<()> {
    if plan.grid().same_shape(grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch("plan built on a different grid".into()))
    }
}

#[inline]
fn lerp(a: f64, b: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * a + alpha * b
}

/// One point per nonzero plan entry at `(1 - alpha) w_i + alpha w_j`, in the
/// coordinates of `grid`.
pub fn displacement_interpolate(plan: &TransportPlan, grid: &TfGrid, alpha: f64) -> Result<PointMassCloud> {
    check_alpha(alpha)?;
    check_grid(plan, grid)?;
    let mut points = Vec::with_capacity(plan.nnz());
    plan.for_each_entry(|i, j, mass| {
        let (fi, ti) = grid.coords(i);
        let (fj, tj) = grid.coords(j);
        points.push(PointMass {
            f: lerp(fi, fj, alpha),
            t: lerp(ti, tj, alpha),
            mass,
        });
    });
    Ok(PointMassCloud { grid: grid.clone(), points })
}

/// Nearest node along one axis; equidistant candidates go to the smaller
/// index.
fn nearest(coord: f64, nodes: usize, origin: f64, step: f64, at: impl Fn(usize) -> f64) -> usize {
    let pos = ((coord - origin) / step).floor();
    let lo = if pos <= 0.0 { 0 } else { (pos as usize).min(nodes - 1) };
    let hi = (lo + 1).min(nodes - 1);
    if (coord - at(hi)).abs() < (coord - at(lo)).abs() {
        hi
    } else {
        lo
    }
}

/// Index of the closest grid node, ties to smaller frequency index then
/// smaller time index.
fn nearest_node(grid: &TfGrid, f: f64, t: f64) -> usize {
    let m = nearest(f, grid.bins(), grid.freq(0), grid.freq_step(), |k| grid.freq(k));
    let n = nearest(t, grid.frames(), grid.time(0), grid.time_step(), |k| grid.time(k));
    grid.index(m, n)
}

/// Adds every point's mass to its nearest node, in cloud order.
pub fn reassign_to_grid(cloud: &PointMassCloud, grid: &TfGrid) -> Result<TfDistribution> {
    if !cloud.grid.same_shape(grid) {
        return Err(Error::GridMismatch("cloud built on a different grid".into()));
    }
    let mut x = vec![0.0; grid.len()];
    for p in &cloud.points {
        x[nearest_node(grid, p.f, p.t)] += p.mass;
    }
    TfDistribution::new(grid.clone(), x)
}

/// `reassign_to_grid(displacement_interpolate(plan, grid, alpha), grid)`
/// without materializing the cloud. Bitwise identical to the two-step form.
pub fn reassign_plan(plan: &TransportPlan, grid: &TfGrid, alpha: f64) -> Result<TfDistribution> {
    check_alpha(alpha)?;
    check_grid(plan, grid)?;
    let mut x = vec![0.0; grid.len()];
    plan.for_each_entry(|i, j, mass| {
        let (fi, ti) = grid.coords(i);
        let (fj, tj) = grid.coords(j);
        x[nearest_node(grid, lerp(fi, fj, alpha), lerp(ti, tj, alpha))] += mass;
    });
    TfDistribution::new(grid.clone(), x)
}

/// Scales `x` to total `(1 - alpha) mass_s + alpha mass_t`.
pub fn restore_amplitude(x: &MagSpectrogram, mass_s: f64, mass_t: f64, alpha: f64) -> Result<MagSpectrogram> {
    check_alpha(alpha)?;
    if !(mass_s > 0.0 && mass_t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "source and target masses must be positive, got {mass_s} and {mass_t}"
        )));
    }
    let total = x.total();
    if !(total > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok(x.scaled(lerp(mass_s, mass_t, alpha) / total))
}

/// Sample-wise `(1 - alpha) y_s + alpha y_t`.
pub fn euclidean_interpolate(y_s: &[f64], y_t: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if y_s.len() != y_t.len() {
        return Err(Error::Shape(format!(
            "signals of {} and {} samples",
            y_s.len(),
            y_t.len()
        )));
    }
    Ok(y_s.iter().zip(y_t).map(|(&a, &b)| lerp(a, b, alpha)).collect())
}
