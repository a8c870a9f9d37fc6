//! Shared data model: the t-f grid, distributions over it, the banded
//! squared-Euclidean cost and sparse transport plans.

mod cost;
mod grid;
mod plan;

pub use cost::{Band, BandLayout, BandedCost};
pub use grid::{CoordinateMode, TfDistribution, TfGrid};
pub use plan::{plan_cost, PlanEntry, TransportPlan};
