use std::io::{BufRead, Write};

use super::cost::{Band, BandLayout, BandedCost};
use super::grid::TfGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Debug, Clone)]
enum Storage {
    /// One dense `bins x bins` block per in-band frame pair, in layout order.
    Blocks(Vec<f64>),
    /// Nonzero entries sorted in block order.
    Sparse(Vec<PlanEntry>),
}

/// Nonnegative transport plan supported inside a frame band.
///
/// Entries are visited in block order: source frame, target frame, source
/// bin, target bin. Marginals are cached at construction.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    grid: TfGrid,
    band: Band,
    layout: BandLayout,
    storage: Storage,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl TransportPlan {
    /// Builds a sparse plan. Duplicate `(source, target)` pairs are summed,
    /// exact zeros are dropped.
    pub fn from_entries(grid: &TfGrid, band: Band, entries: Vec<PlanEntry>) -> Result<Self> {
        let layout = BandLayout::new(grid.frames(), band);
        for e in &entries {
            if !(e.mass.is_finite() && e.mass >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "plan mass {} at ({}, {})",
                    e.mass, e.source, e.target
                )));
            }
            if e.source >= grid.len() || e.target >= grid.len() {
                return Err(Error::Shape(format!(
                    "entry ({}, {}) outside a grid of {} points",
                    e.source,
                    e.target,
                    grid.len()
                )));
            }
            if !band.contains(grid.point(e.source).1, grid.point(e.target).1) {
                return Err(Error::OutsideBand { i: e.source, j: e.target });
            }
        }
        let key = |e: &PlanEntry| {
            let (m, n) = grid.point(e.source);
            let (m2, n2) = grid.point(e.target);
            (n, n2, m, m2)
        };
        let mut entries = entries;
        entries.sort_by_key(key);
        let mut merged: Vec<PlanEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.source == e.source && last.target == e.target => last.mass += e.mass,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.mass > 0.0);
        let mut plan = Self {
            grid: grid.clone(),
            band,
            layout,
            storage: Storage::Sparse(merged),
            row: Vec::new(),
            col: Vec::new(),
        };
        plan.refresh_marginals();
        Ok(plan)
    }

    /// Dense block storage; `blocks` holds `num_pairs * bins^2` masses.
    #[cfg(test)]
    pub(crate) fn from_blocks(grid: &TfGrid, band: Band, blocks: Vec<f64>) -> Result<Self> {
        let layout = BandLayout::new(grid.frames(), band);
        let expected = layout.num_pairs() * grid.bins() * grid.bins();
        if blocks.len() != expected {
            return Err(Error::Shape(format!("{} block entries, expected {expected}", blocks.len())));
        }
        let mut plan = Self {
            grid: grid.clone(),
            band,
            layout,
            storage: Storage::Blocks(blocks),
            row: Vec::new(),
            col: Vec::new(),
        };
        plan.refresh_marginals();
        Ok(plan)
    }

    pub(crate) fn from_blocks_with_marginals(
        grid: &TfGrid,
        band: Band,
        blocks: Vec<f64>,
        row: Vec<f64>,
        col: Vec<f64>,
    ) -> Self {
        let layout = BandLayout::new(grid.frames(), band);
        debug_assert_eq!(blocks.len(), layout.num_pairs() * grid.bins() * grid.bins());
        Self {
            grid: grid.clone(),
            band,
            layout,
            storage: Storage::Blocks(blocks),
            row,
            col,
        }
    }

    /// Plan with `x_i` on the diagonal.
    pub fn diagonal(grid: &TfGrid, band: Band, x: &[f64]) -> Result<Self> {
        let entries = x
            .iter()
            .enumerate()
            .map(|(i, &mass)| PlanEntry { source: i, target: i, mass })
            .collect();
        Self::from_entries(grid, band, entries)
    }

    fn refresh_marginals(&mut self) {
        let (row, col) = self.recompute_marginals();
        self.row = row;
        self.col = col;
    }

    /// Marginals summed afresh from the stored entries.
    pub fn recompute_marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; self.grid.len()];
        let mut col = vec![0.0; self.grid.len()];
        self.for_each_entry(|i, j, mass| {
            row[i] += mass;
            col[j] += mass;
        });
        (row, col)
    }

    pub fn grid(&self) -> &TfGrid {
        &self.grid
    }

    pub fn band(&self) -> Band {
        self.band
    }

    /// `P 1`.
    pub fn row_marginal(&self) -> &[f64] {
        &self.row
    }

    /// `P^T 1`.
    pub fn col_marginal(&self) -> &[f64] {
        &self.col
    }

    pub fn total_mass(&self) -> f64 {
        self.row.iter().sum()
    }

    pub fn is_dense_storage(&self) -> bool {
        matches!(self.storage, Storage::Blocks(_))
    }

    /// Visits every stored entry with positive mass in block order.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Sparse(entries) => {
                for e in entries {
                    f(e.source, e.target, e.mass);
                }
            }
            Storage::Blocks(blocks) => {
                let bins = self.grid.bins();
                let bsize = bins * bins;
                for (b, n, n2) in self.layout.pairs() {
                    let block = &blocks[b * bsize..(b + 1) * bsize];
                    for m in 0..bins {
                        let row = &block[m * bins..(m + 1) * bins];
                        let i = n * bins + m;
                        for (m2, &mass) in row.iter().enumerate() {
                            if mass > 0.0 {
                                f(i, n2 * bins + m2, mass);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn entries(&self) -> Vec<PlanEntry> {
        let mut out = Vec::new();
        self.for_each_entry(|source, target, mass| out.push(PlanEntry { source, target, mass }));
        out
    }

    pub fn nnz(&self) -> usize {
        let mut count = 0;
        self.for_each_entry(|_, _, _| count += 1);
        count
    }

    pub fn max_mass(&self) -> f64 {
        let mut best = 0.0f64;
        self.for_each_entry(|_, _, m| best = best.max(m));
        best
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        if i >= self.grid.len() || j >= self.grid.len() {
            return 0.0;
        }
        let (m, n) = self.grid.point(i);
        let (m2, n2) = self.grid.point(j);
        match &self.storage {
            Storage::Sparse(entries) => entries
                .binary_search_by_key(&(n, n2, m, m2), |e| {
                    let (em, en) = self.grid.point(e.source);
                    let (em2, en2) = self.grid.point(e.target);
                    (en, en2, em, em2)
                })
                .map(|k| entries[k].mass)
                .unwrap_or(0.0),
            Storage::Blocks(blocks) => match self.layout.block_index(n, n2) {
                Some(b) => {
                    let bins = self.grid.bins();
                    blocks[b * bins * bins + m * bins + m2]
                }
                None => 0.0,
            },
        }
    }

    /// Largest frame displacement carrying positive mass.
    pub fn max_frame_displacement(&self) -> usize {
        let bins = self.grid.bins();
        let mut worst = 0;
        self.for_each_entry(|i, j, _| worst = worst.max((i / bins).abs_diff(j / bins)));
        worst
    }

    /// Dense block copy laid out for `band`, which must cover this plan's support.
    pub(crate) fn to_blocks(&self, band: Band) -> Result<Vec<f64>> {
        let layout = BandLayout::new(self.grid.frames(), band);
        let bins = self.grid.bins();
        let mut blocks = vec![0.0; layout.num_pairs() * bins * bins];
        let mut bad = None;
        self.for_each_entry(|i, j, mass| {
            let (m, n) = (i % bins, i / bins);
            let (m2, n2) = (j % bins, j / bins);
            match layout.block_index(n, n2) {
                Some(b) => blocks[b * bins * bins + m * bins + m2] += mass,
                None => bad = Some((i, j)),
            }
        });
        match bad {
            Some((i, j)) => Err(Error::OutsideBand { i, j }),
            None => Ok(blocks),
        }
    }

    /// Writes `i i' mass` lines with one-based indices and 17 significant digits.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut result = Ok(());
        self.for_each_entry(|i, j, mass| {
            if result.is_ok() {
                result = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, mass);
            }
        });
        result
    }

    pub fn read_triplets<R: BufRead>(input: R, grid: &TfGrid, band: Band) -> Result<Self> {
        let mut entries = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse { line: k + 1, msg: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: k + 1, msg: msg.to_string() };
            let mut fields = line.split_whitespace();
            let i: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad source index"))?;
            let j: usize = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad target index"))?;
            let mass: f64 = fields.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad mass"))?;
            if i == 0 || j == 0 || fields.next().is_some() {
                return Err(bad("expected `i i' mass` with one-based indices"));
            }
            entries.push(PlanEntry { source: i - 1, target: j - 1, mass });
        }
        Self::from_entries(grid, band, entries)
    }
}

/// `<C, P>` over the plan's support.
pub fn plan_cost(plan: &TransportPlan, cost: &BandedCost) -> Result<f64> {
    if !plan.grid().same_shape(cost.grid()) {
        return Err(Error::GridMismatch("plan and cost built on different grids".into()));
    }
    let mut total = 0.0;
    let mut bad = None;
    plan.for_each_entry(|i, j, mass| match cost.get(i, j) {
        Some(c) => total += c * mass,
        None => {
            bad.get_or_insert((i, j));
        }
    });
    match bad {
        Some((i, j)) => Err(Error::OutsideBand { i, j }),
        None => Ok(total),
    }
}
