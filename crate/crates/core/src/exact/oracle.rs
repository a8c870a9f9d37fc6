//! Exact transportation LP in rational arithmetic, for cross-checking the
//! network simplex on small instances.
//!
//! Every `f64` is a dyadic rational, so inputs convert exactly. The LP is
//! solved by a dense two-phase tableau simplex with Bland's rule, which
//! terminates on degenerate problems; no rounding happens until the final
//! objective is converted back to `f64`.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{check_inputs, ORACLE_MAX_POINTS};
use crate::error::{Error, Result};
use crate::transport::{BandedCost, PlanEntry, TfDistribution, TransportPlan};

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

/// Returns the optimal `<C, P>` and a vertex attaining it. Inputs are each
/// rescaled to unit mass exactly before solving.
pub fn brute_force_ot(
    x_s: &TfDistribution,
    x_t: &TfDistribution,
    cost: &BandedCost,
) -> Result<(f64, TransportPlan)> {
    check_inputs(x_s, x_t, cost)?;
    let grid = cost.grid();
    let points = grid.len();
    if points > ORACLE_MAX_POINTS {
        return Err(Error::TooLarge(points));
    }
    let unit = |x: &TfDistribution, side| -> Result<Vec<BigRational>> {
        let raw: Vec<BigRational> = x.masses().iter().map(|&v| exact(v)).collect();
        let total = raw.iter().fold(BigRational::zero(), |acc, v| acc + v);
        if total.is_zero() {
            return Err(Error::EmptyMarginal(side));
        }
        Ok(raw.into_iter().map(|v| v / &total).collect())
    };
    let a = unit(x_s, "source")?;
    let b = unit(x_t, "target")?;

    let vars: Vec<(usize, usize)> = (0..points)
        .flat_map(|i| (0..points).map(move |j| (i, j)))
        .filter(|&(i, j)| cost.contains(i, j))
        .collect();
    let costs: Vec<BigRational> = vars.iter().map(|&(i, j)| exact(cost.get(i, j).unwrap())).collect();

    let mut lp = Tableau::new(points, &vars, &a, &b);
    // phase 1: drive artificial mass to zero
    let phase1: Vec<BigRational> = (0..lp.cols)
        .map(|c| if c >= vars.len() { BigRational::one() } else { BigRational::zero() })
        .collect();
    lp.optimize(&phase1, lp.cols);
    if !lp.objective(&phase1).is_zero() {
        return Err(Error::Infeasible);
    }
    lp.expel_artificials(vars.len());

    let mut phase2 = costs.clone();
    phase2.resize(lp.cols, BigRational::zero());
    lp.optimize(&phase2, vars.len());
    let objective = lp.objective(&phase2);

    let mut entries = Vec::new();
    for (r, &col) in lp.basis.iter().enumerate() {
        if col < vars.len() && lp.rhs(r).is_positive() {
            let (source, target) = vars[col];
            entries.push(PlanEntry {
                source,
                target,
                mass: lp.rhs(r).to_f64().unwrap(),
            });
        }
    }
    let plan = TransportPlan::from_entries(grid, cost.band(), entries)?;
    Ok((objective.to_f64().unwrap(), plan))
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    /// Row constraints then column constraints, one artificial per row.
    fn new(points: usize, vars: &[(usize, usize)], a: &[BigRational], b: &[BigRational]) -> Self {
        let rows = 2 * points;
        let cols = vars.len() + rows;
        let mut t = vec![vec![BigRational::zero(); cols + 1]; rows];
        for (k, &(i, j)) in vars.iter().enumerate() {
            t[i][k] = BigRational::one();
            t[points + j][k] = BigRational::one();
        }
        for r in 0..rows {
            t[r][vars.len() + r] = BigRational::one();
            t[r][cols] = if r < points { a[r].clone() } else { b[r - points].clone() };
        }
        let basis = (0..rows).map(|r| vars.len() + r).collect();
        Self { t, basis, cols }
    }

    fn rhs(&self, r: usize) -> &BigRational {
        &self.t[r][self.cols]
    }

    fn objective(&self, c: &[BigRational]) -> BigRational {
        self.basis
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (r, &col)| acc + &c[col] * self.rhs(r))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col].clone();
        for v in self.t[row].iter_mut() {
            *v = &*v / &p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row || line[col].is_zero() {
                continue;
            }
            let f = line[col].clone();
            for (v, pv) in line.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule over columns `< allowed`.
    fn optimize(&mut self, c: &[BigRational], allowed: usize) {
        loop {
            let mut entering = None;
            for col in 0..allowed {
                if self.basis.contains(&col) {
                    continue;
                }
                let mut reduced = c[col].clone();
                for (r, &bcol) in self.basis.iter().enumerate() {
                    if !self.t[r][col].is_zero() {
                        reduced -= &c[bcol] * &self.t[r][col];
                    }
                }
                if reduced.is_negative() {
                    entering = Some(col);
                    break;
                }
            }
            let Some(col) = entering else { return };
            let mut leave: Option<(usize, BigRational)> = None;
            for r in 0..self.t.len() {
                if !self.t[r][col].is_positive() {
                    continue;
                }
                let ratio = self.rhs(r) / &self.t[r][col];
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            // the transportation LP is bounded, a leaving row always exists
            let (row, _) = leave.expect("bounded LP");
            self.pivot(row, col);
        }
    }

    /// Pivots zero-level artificials out of the basis where possible; rows
    /// where that fails are redundant and stay inert.
    fn expel_artificials(&mut self, real: usize) {
        for r in 0..self.t.len() {
            if self.basis[r] < real {
                continue;
            }
            if let Some(col) = (0..real).find(|&c| !self.t[r][c].is_zero() && !self.basis.contains(&c)) {
                self.pivot(r, col);
            }
        }
    }
}
