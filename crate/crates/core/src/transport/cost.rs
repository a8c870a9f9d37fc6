use std::fmt;
use std::str::FromStr;

use super::grid::TfGrid;
use crate::error::{Error, Result};

/// Maximum allowed frame displacement `|n - n'|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Limited(usize),
    Unlimited,
}

impl Band {
    pub fn contains(&self, n: usize, n2: usize) -> bool {
        match self {
            Band::Unlimited => true,
            Band::Limited(p) => n.abs_diff(n2) <= *p,
        }
    }

    /// Half-width actually reachable on a grid with `frames` frames.
    pub fn reach(&self, frames: usize) -> usize {
        match self {
            Band::Unlimited => frames.saturating_sub(1),
            Band::Limited(p) => (*p).min(frames.saturating_sub(1)),
        }
    }

    /// True when `self` admits every displacement `other` admits.
    pub fn covers(&self, other: &Band) -> bool {
        match (self, other) {
            (Band::Unlimited, _) => true,
            (Band::Limited(_), Band::Unlimited) => false,
            (Band::Limited(a), Band::Limited(b)) => a >= b,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Limited(p) => write!(f, "{p}"),
            Band::Unlimited => f.write_str("inf"),
        }
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Band::Unlimited);
        }
        s.parse::<usize>()
            .map(Band::Limited)
            .map_err(|_| Error::InvalidParameter(format!("band half-width {s:?}: expected a nonnegative integer or \"inf\"")))
    }
}

/// Enumeration of the frame pairs `(n, n')` inside a band, in the order
/// `n` ascending then `n'` ascending. Each pair owns one `bins x bins` block.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLayout {
    frames: usize,
    reach: usize,
    starts: Vec<usize>,
}

impl BandLayout {
    pub fn new(frames: usize, band: Band) -> Self {
        let reach = band.reach(frames);
        let mut starts = Vec::with_capacity(frames + 1);
        let mut acc = 0;
        for n in 0..frames {
            starts.push(acc);
            let (lo, hi) = Self::range(frames, reach, n);
            acc += hi - lo + 1;
        }
        starts.push(acc);
        Self { frames, reach, starts }
    }

    fn range(frames: usize, reach: usize, n: usize) -> (usize, usize) {
        (n.saturating_sub(reach), (n + reach).min(frames - 1))
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    /// Inclusive range of target frames coupled to source frame `n`.
    pub fn targets(&self, n: usize) -> (usize, usize) {
        Self::range(self.frames, self.reach, n)
    }

    pub fn num_pairs(&self) -> usize {
        self.starts[self.frames]
    }

    pub fn block_index(&self, n: usize, n2: usize) -> Option<usize> {
        if n >= self.frames || n2 >= self.frames || n.abs_diff(n2) > self.reach {
            return None;
        }
        let (lo, _) = self.targets(n);
        Some(self.starts[n] + n2 - lo)
    }

    /// All `(block, n, n')` triples in layout order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.frames).flat_map(move |n| {
            let (lo, hi) = self.targets(n);
            (lo..=hi).map(move |n2| (self.starts[n] + n2 - lo, n, n2))
        })
    }
}

/// Squared-Euclidean cost restricted to `|n - n'| <= p`.
///
/// On a regular grid the cost separates as `fc(|m - m'|) + tc(|n - n'|)`, so
/// entries are evaluated from two difference tables rather than stored per
/// block. Pairs outside the band have no entry at all.
#[derive(Debug, Clone)]
pub struct BandedCost {
    grid: TfGrid,
    band: Band,
    layout: BandLayout,
    freq_cost: Vec<f64>,
    time_cost: Vec<f64>,
}

impl BandedCost {
    pub fn new(grid: &TfGrid, band: Band) -> Self {
        let layout = BandLayout::new(grid.frames(), band);
        let df = grid.freq_step();
        let dt = grid.time_step();
        let freq_cost = (0..grid.bins()).map(|d| (d as f64 * df).powi(2)).collect();
        let time_cost = (0..=layout.reach()).map(|d| (d as f64 * dt).powi(2)).collect();
        Self {
            grid: grid.clone(),
            band,
            layout,
            freq_cost,
            time_cost,
        }
    }

    pub fn grid(&self) -> &TfGrid {
        &self.grid
    }

    pub fn band(&self) -> Band {
        self.band
    }

    pub fn layout(&self) -> &BandLayout {
        &self.layout
    }

    /// True when every frame pair is in band, so the cost is the full matrix.
    pub fn is_dense(&self) -> bool {
        self.layout.reach() + 1 >= self.grid.frames()
    }

    /// Number of finite entries held by the band.
    pub fn stored_entries(&self) -> usize {
        self.grid.bins() * self.grid.bins() * self.layout.num_pairs()
    }

    /// `(f_m - f_m')^2` indexed by `|m - m'|`.
    pub fn freq_costs(&self) -> &[f64] {
        &self.freq_cost
    }

    /// `(t_n - t_n')^2` for `|n - n'| = dn`, `None` outside the band.
    pub fn time_cost(&self, dn: usize) -> Option<f64> {
        self.time_cost.get(dn).copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let (_, n) = self.grid.point(i);
        let (_, n2) = self.grid.point(j);
        i < self.grid.len() && j < self.grid.len() && n.abs_diff(n2) <= self.layout.reach()
    }

    /// Cost between flat indices `i` and `j`; `None` outside the band.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i >= self.grid.len() || j >= self.grid.len() {
            return None;
        }
        let (m, n) = self.grid.point(i);
        let (m2, n2) = self.grid.point(j);
        let tc = self.time_cost(n.abs_diff(n2))?;
        Some(self.freq_cost[m.abs_diff(m2)] + tc)
    }

    pub fn max_cost(&self) -> f64 {
        self.freq_cost.last().copied().unwrap_or(0.0) + self.time_cost.last().copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn band_parsing() {
        assert_eq!("inf".parse::<Band>().unwrap(), Band::Unlimited);
        assert_eq!("5".parse::<Band>().unwrap(), Band::Limited(5));
        assert!("-1".parse::<Band>().is_err());
        assert_eq!(Band::Limited(3).to_string(), "3");
    }

    #[test]
    fn zero_band_stores_diagonal_frame_blocks_only() {
        let g = TfGrid::dimensionless(3, 2).unwrap();
        let c = BandedCost::new(&g, Band::Limited(0));
        assert_eq!(c.stored_entries(), 9 * 2);
        for m in 0..3 {
            for m2 in 0..3 {
                assert_eq!(c.get(g.index(m, 0), g.index(m2, 0)), Some(((m as f64) - m2 as f64).powi(2)));
                assert_eq!(c.get(g.index(m, 0), g.index(m2, 1)), None);
            }
        }
    }

    #[test]
    fn unlimited_band_is_dense() {
        let g = TfGrid::dimensionless(4, 5).unwrap();
        let c = BandedCost::new(&g, Band::Unlimited);
        assert!(c.is_dense());
        assert_eq!(c.stored_entries(), g.len() * g.len());
        assert_eq!(c.get(0, g.len() - 1), Some(9.0 + 16.0));
    }

    #[test]
    fn paper_scale_entry_count() {
        let g = TfGrid::dimensionless(321, 49).unwrap();
        let c = BandedCost::new(&g, Band::Limited(0));
        assert_eq!(c.stored_entries(), 5_049_009);
        let dense = (g.len() * g.len()) as f64;
        assert!((dense / c.stored_entries() as f64 - 49.0).abs() < 1e-9);
        // p = 5: 11 pairs per interior frame, fewer at the edges
        let c5 = BandedCost::new(&g, Band::Limited(5));
        assert_eq!(c5.layout().num_pairs(), 49 * 11 - 2 * (5 + 4 + 3 + 2 + 1));
    }

    #[test]
    fn layout_enumerates_band_in_order() {
        let l = BandLayout::new(4, Band::Limited(1));
        let pairs: Vec<_> = l.pairs().collect();
        assert_eq!(
            pairs,
            vec![(0, 0, 0), (1, 0, 1), (2, 1, 0), (3, 1, 1), (4, 1, 2), (5, 2, 1), (6, 2, 2), (7, 2, 3), (8, 3, 2), (9, 3, 3)]
        );
        for (b, n, n2) in pairs {
            assert_eq!(l.block_index(n, n2), Some(b));
        }
        assert_eq!(l.block_index(0, 2), None);
    }

    proptest! {
        #[test]
        fn cost_is_symmetric_with_zero_diagonal(
            bins in 1usize..6, frames in 1usize..6, p in 0usize..4, physical in any::<bool>()
        ) {
            let mode = if physical { super::super::CoordinateMode::Physical } else { super::super::CoordinateMode::Dimensionless };
            let g = TfGrid::new(bins, frames, 8000, 160, mode).unwrap();
            let c = BandedCost::new(&g, Band::Limited(p));
            for i in 0..g.len() {
                prop_assert_eq!(c.get(i, i), Some(0.0));
                for j in 0..g.len() {
                    let (fi, ti) = g.coords(i);
                    let (fj, tj) = g.coords(j);
                    let in_band = g.point(i).1.abs_diff(g.point(j).1) <= p;
                    prop_assert_eq!(c.get(i, j).is_some(), in_band);
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                    if let Some(v) = c.get(i, j) {
                        let direct = (fi - fj).powi(2) + (ti - tj).powi(2);
                        prop_assert!(v >= 0.0);
                        prop_assert!((v - direct).abs() <= 1e-9 * direct.max(1.0));
                    }
                }
            }
        }
    }
}
