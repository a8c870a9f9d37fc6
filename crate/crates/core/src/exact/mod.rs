//! Exact balanced optimal transport between two t-f distributions.

mod oracle;
mod simplex;

pub use oracle::brute_force_ot;

use crate::error::{Error, Result};
use crate::transport::{BandedCost, PlanEntry, TfDistribution, TransportPlan};

/// Largest grid the rational-arithmetic oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 12;

/// Artificial flow tolerated at the optimum before declaring infeasibility.
const INFEASIBLE_FLOW: f64 = 1e-10;

pub(crate) fn check_inputs(x_s: &TfDistribution, x_t: &TfDistribution, cost: &BandedCost) -> Result<()> {
    if !x_s.grid().same_shape(x_t.grid()) {
        return Err(Error::GridMismatch(format!(
            "source is {}x{}, target is {}x{}",
            x_s.grid().bins(),
            x_s.grid().frames(),
            x_t.grid().bins(),
            x_t.grid().frames()
        )));
    }
    if !x_s.grid().same_shape(cost.grid()) {
        return Err(Error::GridMismatch("cost built on a different grid".into()));
    }
    Ok(())
}

/// Rescales to sum exactly 1 when already within 1e-9 of it.
fn renormalized(x: &TfDistribution) -> Result<Vec<f64>> {
    let sum = x.total();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { sum });
    }
    Ok(x.masses().iter().map(|v| v / sum).collect())
}

/// Minimizes `<C, P>` over plans with marginals `x_s` and `x_t` using only
/// in-band arcs.
///
/// The result is an optimal vertex: at most `2I - 1` nonzero entries. When
/// several plans are optimal, which one is returned is unspecified.
pub fn solve_ot(x_s: &TfDistribution, x_t: &TfDistribution, cost: &BandedCost) -> Result<TransportPlan> {
    check_inputs(x_s, x_t, cost)?;
    let a = renormalized(x_s)?;
    let b = renormalized(x_t)?;
    let solution = simplex::solve(&a, &b, cost);
    log::debug!(
        "exact OT on {} points: {} pivots, residual artificial flow {:e}",
        a.len(),
        solution.pivots,
        solution.artificial_flow
    );
    if solution.artificial_flow > INFEASIBLE_FLOW {
        return Err(Error::Infeasible);
    }
    let entries = solution
        .flows
        .into_iter()
        .map(|(source, target, mass)| PlanEntry { source, target, mass })
        .collect();
    TransportPlan::from_entries(cost.grid(), cost.band(), entries)
}
