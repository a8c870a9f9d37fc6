//! Unbalanced optimal transport with KL marginal penalties:
//!
//! ```text
//! min_{P >= 0}  <C, P> + beta * KL(P 1 | x_s) + beta * KL(P^T 1 | x_t)
//! ```
//!
//! solved by majorization-minimization. Each iteration rescales every in-band
//! entry multiplicatively,
//!
//! ```text
//! P_ij <- P_ij * exp(-C_ij / (2 beta)) * sqrt(x_s_i / r_i) * sqrt(x_t_j / c_j)
//! ```
//!
//! where `r` and `c` are the current row and column sums. The update minimizes
//! a surrogate that majorizes the objective at the current iterate, so the
//! objective never increases. Fixed points with `P_ij > 0` satisfy
//! `C_ij + beta * log(r_i / x_s_i) + beta * log(c_j / x_t_j) = 0`.
//!
//! Entries outside the frame band are never allocated and stay zero.

use crate::error::{Error, Result};
use crate::exact::check_inputs;
use crate::transport::{BandLayout, BandedCost, TfDistribution, TransportPlan};

/// Marginal entries below this are raised to it before solving.
pub const ZERO_BIN_CLAMP: f64 = 1e-12;

/// Entries below this fraction of the largest one are ignored by the
/// stationarity residual.
pub const RESIDUAL_SUPPORT_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct UotParams {
    /// Weight of the KL marginal penalties.
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub rel_tol: f64,
    /// Lower bound applied to marginal sums before dividing by them.
    pub min_mass_floor: f64,
    /// When set, the objective test alone does not end the run: the
    /// stationarity residual must also be at most this.
    pub stationarity_tol: Option<f64>,
}

impl Default for UotParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            max_iters: 2000,
            rel_tol: 1e-7,
            min_mass_floor: 1e-300,
            stationarity_tol: None,
        }
    }
}

impl UotParams {
    pub fn with_beta(beta: f64) -> Self {
        Self { beta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {} must be positive", self.beta)));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("rel_tol = {} must be positive", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.min_mass_floor > 0.0) {
            return Err(Error::InvalidParameter("min_mass_floor must be positive".into()));
        }
        if let Some(t) = self.stationarity_tol {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!("stationarity_tol = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// One line of solver telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `||P 1 - x_s||_1`
    pub source_l1: f64,
    /// `||P^T 1 - x_t||_1`
    pub target_l1: f64,
    /// Max stationarity violation over the visible support.
    pub residual: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iteration,objective,source_l1,target_l1,residual";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.iteration, self.objective, self.source_l1, self.target_l1, self.residual
        )
    }
}

#[derive(Debug, Clone)]
pub struct UotSolution {
    pub plan: TransportPlan,
    pub objective: f64,
    /// MM iterations performed.
    pub iterations: usize,
    /// False when `max_iters` was reached before the objective settled.
    pub converged: bool,
    /// Final stationarity residual, see [`stationarity_residual`].
    pub residual: f64,
    /// Mass added by raising near-zero marginal entries, source and target.
    pub clamped_mass: (f64, f64),
    /// Objective of the initial plan followed by one value per iteration.
    pub history: Vec<f64>,
    pub source_l1: f64,
    pub target_l1: f64,
}

impl UotSolution {
    /// Largest objective increase between consecutive iterates (negative when
    /// the sequence strictly decreases).
    pub fn max_objective_increase(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sum_i a_i log(a_i / b_i) - a_i + b_i` with `0 log 0 = 0`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("KL of vectors of length {} and {}", a.len(), b.len())));
    }
    let mut total = 0.0;
    for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x < 0.0 || y < 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidParameter(format!("KL argument out of domain at index {k}")));
        }
        if y == 0.0 {
            if x > 0.0 {
                return Err(Error::KlUndefined(k));
            }
            continue;
        }
        total += y * kl_ratio(x / y);
    }
    Ok(total)
}

/// `t log t - t + 1`, accurate near `t = 1`.
fn kl_ratio(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let d = t - 1.0;
        (t * d.ln_1p() - d).max(0.0)
    }
}

fn kl_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| y * kl_ratio(x / y)).sum()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Unbalanced objective of `plan` against `x_s`, `x_t`.
pub fn uot_objective(
    plan: &TransportPlan,
    x_s: &TfDistribution,
    x_t: &TfDistribution,
    cost: &BandedCost,
    beta: f64,
) -> Result<f64> {
    check_inputs(x_s, x_t, cost)?;
    let transport = crate::transport::plan_cost(plan, cost)?;
    let ks = kl_divergence(plan.row_marginal(), x_s.masses())?;
    let kt = kl_divergence(plan.col_marginal(), x_t.masses())?;
    Ok(transport + beta * (ks + kt))
}

/// Raises entries below [`ZERO_BIN_CLAMP`]; returns the mass added.
pub fn clamp_marginal(x: &[f64]) -> (Vec<f64>, f64) {
    let mut added = 0.0;
    let clamped = x
        .iter()
        .map(|&v| {
            if v < ZERO_BIN_CLAMP {
                added += ZERO_BIN_CLAMP - v;
                ZERO_BIN_CLAMP
            } else {
                v
            }
        })
        .collect();
    (clamped, added)
}

/// `max |C_ij + beta log(r_i / a_i) + beta log(c_j / b_j)|` over entries
/// with `P_ij >= 1e-8 max P`.
pub fn stationarity_residual(plan: &TransportPlan, a: &[f64], b: &[f64], cost: &BandedCost, beta: f64) -> f64 {
    let lr: Vec<f64> = plan.row_marginal().iter().zip(a).map(|(r, x)| beta * (r / x).ln()).collect();
    let lc: Vec<f64> = plan.col_marginal().iter().zip(b).map(|(c, x)| beta * (c / x).ln()).collect();
    let threshold = RESIDUAL_SUPPORT_FRACTION * plan.max_mass();
    let mut worst = 0.0f64;
    plan.for_each_entry(|i, j, mass| {
        if mass >= threshold {
            let c = cost.get(i, j).unwrap_or(f64::INFINITY);
            worst = worst.max((c + lr[i] + lc[j]).abs());
        }
    });
    worst
}

pub fn solve_uot(
    x_s: &TfDistribution,
    x_t: &TfDistribution,
    cost: &BandedCost,
    params: &UotParams,
) -> Result<UotSolution> {
    UotSolver::new(params.clone()).solve(x_s, x_t, cost)
}

type Observer<'o> = Box<dyn FnMut(&IterationRecord) + 'o>;

/// MM solver with optional warm start and per-iteration observer.
pub struct UotSolver<'o> {
    params: UotParams,
    init: Option<TransportPlan>,
    observer: Option<Observer<'o>>,
}

impl<'o> UotSolver<'o> {
    pub fn new(params: UotParams) -> Self {
        Self {
            params,
            init: None,
            observer: None,
        }
    }

    /// Start from `plan` instead of the band-restricted outer product.
    pub fn with_initial_plan(mut self, plan: TransportPlan) -> Self {
        self.init = Some(plan);
        self
    }

    /// Called once for the initial plan and after every iteration. Enables
    /// per-iteration residual computation, which costs two extra passes.
    pub fn with_observer(mut self, observer: impl FnMut(&IterationRecord) + 'o) -> Self {
        self.observer = Some(Box::new(observer));
        self
    }

    pub fn solve(mut self, x_s: &TfDistribution, x_t: &TfDistribution, cost: &BandedCost) -> Result<UotSolution> {
        self.params.validate()?;
        check_inputs(x_s, x_t, cost)?;
        if !(x_s.total() > 0.0) {
            return Err(Error::EmptyMarginal("source"));
        }
        if !(x_t.total() > 0.0) {
            return Err(Error::EmptyMarginal("target"));
        }
        let (a, clamp_s) = clamp_marginal(x_s.masses());
        let (b, clamp_t) = clamp_marginal(x_t.masses());
        if clamp_s > 0.0 || clamp_t > 0.0 {
            log::debug!("clamped zero bins: added {clamp_s:e} source mass, {clamp_t:e} target mass");
        }

        let beta = self.params.beta;
        let floor = self.params.min_mass_floor;
        let mut kernel = Kernel::new(cost, beta);
        let blocks = match self.init.take() {
            Some(plan) => {
                if !plan.grid().same_shape(cost.grid()) {
                    return Err(Error::GridMismatch("initial plan built on a different grid".into()));
                }
                plan.to_blocks(cost.band())?
            }
            None => kernel.outer_product(&a, &b),
        };
        kernel.blocks = blocks;

        let mut sums = kernel.sums();
        let objective = |s: &Sums| s.cost + beta * (kl_unchecked(&s.row, &a) + kl_unchecked(&s.col, &b));
        let mut obj = objective(&sums);
        let mut history = vec![obj];
        let mut observer = self.observer.take();
        if let Some(f) = observer.as_mut() {
            f(&kernel.record(0, obj, &sums, &a, &b, beta));
        }

        let mut converged = false;
        let mut iterations = 0;
        let mut u = vec![0.0; a.len()];
        let mut v = vec![0.0; b.len()];
        for it in 1..=self.params.max_iters {
            for ((u, &x), &r) in u.iter_mut().zip(&a).zip(&sums.row) {
                *u = (x / r.max(floor)).sqrt();
            }
            for ((v, &x), &c) in v.iter_mut().zip(&b).zip(&sums.col) {
                *v = (x / c.max(floor)).sqrt();
            }
            sums = kernel.update(&u, &v);
            let next = objective(&sums);
            history.push(next);
            iterations = it;
            if let Some(f) = observer.as_mut() {
                f(&kernel.record(it, next, &sums, &a, &b, beta));
            }
            let change = (obj - next).abs();
            obj = next;
            if change <= self.params.rel_tol * history[history.len() - 2].abs().max(floor) {
                let stationary = match self.params.stationarity_tol {
                    Some(tol) => kernel.residual(&sums, &a, &b, beta) <= tol,
                    None => true,
                };
                if stationary {
                    converged = true;
                    break;
                }
            }
        }

        let Sums { row, col, .. } = sums;
        let plan = TransportPlan::from_blocks_with_marginals(cost.grid(), cost.band(), kernel.blocks, row, col);
        let residual = stationarity_residual(&plan, &a, &b, cost, beta);
        if !converged {
            log::warn!(
                "UOT did not converge in {} iterations; objective {obj:e}, stationarity residual {residual:e}",
                iterations
            );
        }
        Ok(UotSolution {
            source_l1: l1(plan.row_marginal(), &a),
            target_l1: l1(plan.col_marginal(), &b),
            plan,
            objective: obj,
            iterations,
            converged,
            residual,
            clamped_mass: (clamp_s, clamp_t),
            history,
        })
    }
}

struct Sums {
    row: Vec<f64>,
    col: Vec<f64>,
    cost: f64,
}

/// Block storage plus the precomputed Gibbs factors of the band.
struct Kernel<'c> {
    cost: &'c BandedCost,
    layout: BandLayout,
    bins: usize,
    /// `exp(-fc(|d|) / 2 beta)` at offset `bins - 1 + d`.
    freq_gibbs: Vec<f64>,
    /// `fc(|d|)` at offset `bins - 1 + d`.
    freq_cost: Vec<f64>,
    time_gibbs: Vec<f64>,
    time_cost: Vec<f64>,
    blocks: Vec<f64>,
}

impl<'c> Kernel<'c> {
    fn new(cost: &'c BandedCost, beta: f64) -> Self {
        let bins = cost.grid().bins();
        let layout = cost.layout().clone();
        let fc = cost.freq_costs();
        let freq_cost: Vec<f64> = (0..2 * bins - 1).map(|k| fc[k.abs_diff(bins - 1)]).collect();
        let freq_gibbs = freq_cost.iter().map(|c| (-c / (2.0 * beta)).exp()).collect();
        let time_cost: Vec<f64> = (0..=layout.reach()).map(|d| cost.time_cost(d).unwrap()).collect();
        let time_gibbs = time_cost.iter().map(|c| (-c / (2.0 * beta)).exp()).collect();
        Self {
            cost,
            layout,
            bins,
            freq_gibbs,
            freq_cost,
            time_gibbs,
            time_cost,
            blocks: Vec::new(),
        }
    }

    /// `x_s x_t^T` on the band, scaled to unit total mass.
    fn outer_product(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let bins = self.bins;
        let mut blocks = vec![0.0; self.layout.num_pairs() * bins * bins];
        let mut total = 0.0;
        for (blk, n, n2) in self.layout.pairs() {
            let block = &mut blocks[blk * bins * bins..(blk + 1) * bins * bins];
            let bt = &b[n2 * bins..(n2 + 1) * bins];
            for m in 0..bins {
                let am = a[n * bins + m];
                for (p, &bv) in block[m * bins..(m + 1) * bins].iter_mut().zip(bt) {
                    *p = am * bv;
                    total += *p;
                }
            }
        }
        let scale = 1.0 / total;
        blocks.iter_mut().for_each(|p| *p *= scale);
        blocks
    }

    fn sums(&self) -> Sums {
        let bins = self.bins;
        let len = self.cost.grid().len();
        let mut row = vec![0.0; len];
        let mut col = vec![0.0; len];
        let mut cost = 0.0;
        for (blk, n, n2) in self.layout.pairs() {
            let block = &self.blocks[blk * bins * bins..(blk + 1) * bins * bins];
            let tc = self.time_cost[n.abs_diff(n2)];
            let col_acc = &mut col[n2 * bins..(n2 + 1) * bins];
            for m in 0..bins {
                let fc = &self.freq_cost[bins - 1 - m..2 * bins - 1 - m];
                let mut rs = 0.0;
                let mut cs = 0.0;
                for ((&p, acc), &c) in block[m * bins..(m + 1) * bins].iter().zip(col_acc.iter_mut()).zip(fc) {
                    rs += p;
                    *acc += p;
                    cs += p * c;
                }
                row[n * bins + m] += rs;
                cost += cs + tc * rs;
            }
        }
        Sums { row, col, cost }
    }

    /// One MM step in place; returns the new marginals and transport cost.
    fn update(&mut self, u: &[f64], v: &[f64]) -> Sums {
        let bins = self.bins;
        let len = self.cost.grid().len();
        let mut row = vec![0.0; len];
        let mut col = vec![0.0; len];
        let mut cost = 0.0;
        for (blk, n, n2) in self.layout.pairs() {
            let block = &mut self.blocks[blk * bins * bins..(blk + 1) * bins * bins];
            let dn = n.abs_diff(n2);
            let (tg, tc) = (self.time_gibbs[dn], self.time_cost[dn]);
            let vt = &v[n2 * bins..(n2 + 1) * bins];
            let col_acc = &mut col[n2 * bins..(n2 + 1) * bins];
            for m in 0..bins {
                let scale = tg * u[n * bins + m];
                let fg = &self.freq_gibbs[bins - 1 - m..2 * bins - 1 - m];
                let fc = &self.freq_cost[bins - 1 - m..2 * bins - 1 - m];
                let mut rs = 0.0;
                let mut cs = 0.0;
                let entries = &mut block[m * bins..(m + 1) * bins];
                for ((((p, &g), &vj), acc), &c) in entries.iter_mut().zip(fg).zip(vt).zip(col_acc.iter_mut()).zip(fc) {
                    let next = *p * g * vj * scale;
                    *p = next;
                    rs += next;
                    *acc += next;
                    cs += next * c;
                }
                row[n * bins + m] += rs;
                cost += cs + tc * rs;
            }
        }
        Sums { row, col, cost }
    }

    fn record(&self, iteration: usize, objective: f64, sums: &Sums, a: &[f64], b: &[f64], beta: f64) -> IterationRecord {
        IterationRecord {
            iteration,
            objective,
            source_l1: l1(&sums.row, a),
            target_l1: l1(&sums.col, b),
            residual: self.residual(sums, a, b, beta),
        }
    }

    fn residual(&self, sums: &Sums, a: &[f64], b: &[f64], beta: f64) -> f64 {
        let bins = self.bins;
        let max = self.blocks.iter().copied().fold(0.0, f64::max);
        let threshold = RESIDUAL_SUPPORT_FRACTION * max;
        let lr: Vec<f64> = sums.row.iter().zip(a).map(|(r, x)| beta * (r / x).ln()).collect();
        let lc: Vec<f64> = sums.col.iter().zip(b).map(|(c, x)| beta * (c / x).ln()).collect();
        let mut residual = 0.0f64;
        for (blk, n, n2) in self.layout.pairs() {
            let block = &self.blocks[blk * bins * bins..(blk + 1) * bins * bins];
            let tc = self.time_cost[n.abs_diff(n2)];
            for m in 0..bins {
                let fc = &self.freq_cost[bins - 1 - m..2 * bins - 1 - m];
                let base = tc + lr[n * bins + m];
                for (m2, (&p, &c)) in block[m * bins..(m + 1) * bins].iter().zip(fc).enumerate() {
                    if p >= threshold && p > 0.0 {
                        residual = residual.max((c + base + lc[n2 * bins + m2]).abs());
                    }
                }
            }
        }
        residual
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{Band, PlanEntry, TfGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dist(grid: &TfGrid, x: Vec<f64>) -> TfDistribution {
        TfDistribution::new(grid.clone(), x).unwrap()
    }

    fn random_dist(grid: &TfGrid, rng: &mut impl Rng) -> TfDistribution {
        let raw: Vec<f64> = (0..grid.len()).map(|_| rng.gen::<f64>() + 0.01).collect();
        let s: f64 = raw.iter().sum();
        dist(grid, raw.into_iter().map(|v| v / s).collect())
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(kl_divergence(&[0.0], &[2.0]).unwrap(), 2.0);
        assert!(matches!(kl_divergence(&[1.0], &[0.0]), Err(Error::KlUndefined(0))));
        assert_eq!(kl_divergence(&[0.0], &[0.0]).unwrap(), 0.0);
        assert!(kl_divergence(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() * 2.0).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() + 0.05).collect();
            let mut want = 0.0;
            for k in 0..8 {
                want += a[k] * (a[k] / b[k]).ln() - a[k] + b[k];
            }
            let got = kl_divergence(&a, &b).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(got >= 0.0);
        }
    }

    #[test]
    fn objective_reduces_to_transport_cost_on_exact_marginals() {
        let g = TfGrid::dimensionless(2, 1).unwrap();
        let c = BandedCost::new(&g, Band::Unlimited);
        let p = TransportPlan::from_entries(&g, Band::Unlimited, vec![PlanEntry { source: 0, target: 1, mass: 1.0 }]).unwrap();
        let xs = dist(&g, vec![1.0, 0.0]);
        let xt = dist(&g, vec![0.0, 1.0]);
        assert_eq!(uot_objective(&p, &xs, &xt, &c, 3.0).unwrap(), 1.0);
        let empty = TransportPlan::from_entries(&g, Band::Unlimited, vec![]).unwrap();
        assert_eq!(uot_objective(&empty, &xs, &xt, &c, 1.5).unwrap(), 2.0 * 1.5);
    }

    #[test]
    fn objective_matches_dense_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = TfGrid::dimensionless(3, 1).unwrap();
        let c = BandedCost::new(&g, Band::Unlimited);
        let xs = random_dist(&g, &mut rng);
        let xt = random_dist(&g, &mut rng);
        let mut dense = [[0.0; 3]; 3];
        let mut entries = Vec::new();
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.gen::<f64>() * 0.2;
                entries.push(PlanEntry { source: i, target: j, mass: *v });
            }
        }
        let p = TransportPlan::from_entries(&g, Band::Unlimited, entries).unwrap();
        let beta = 0.7;
        let mut want = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                want += dense[i][j] * ((i as f64) - j as f64).powi(2);
            }
        }
        for k in 0..3 {
            let r: f64 = dense[k].iter().sum();
            let cl: f64 = dense.iter().map(|row| row[k]).sum();
            let (a, b) = (xs.masses()[k], xt.masses()[k]);
            want += beta * (r * (r / a).ln() - r + a);
            want += beta * (cl * (cl / b).ln() - cl + b);
        }
        assert!((uot_objective(&p, &xs, &xt, &c, beta).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn diagonal_start_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = TfGrid::dimensionless(3, 3).unwrap();
        let x = random_dist(&g, &mut rng);
        for band in [Band::Limited(0), Band::Limited(1), Band::Unlimited] {
            let c = BandedCost::new(&g, band);
            let init = TransportPlan::diagonal(&g, band, x.masses()).unwrap();
            let sol = UotSolver::new(UotParams::with_beta(0.3)).with_initial_plan(init).solve(&x, &x, &c).unwrap();
            assert!(sol.converged);
            assert_eq!(sol.objective, 0.0);
            for i in 0..g.len() {
                assert_eq!(sol.plan.mass(i, i), x.masses()[i]);
            }
            assert_eq!(sol.plan.nnz(), g.len());
        }
    }

    #[test]
    fn two_point_cross_mass() {
        // scalar objective f(g) = c g + 2 beta (g log g - g + 1), minimized by
        // golden-section search
        let (c, beta) = (1.0f64, 1.0f64);
        let f = |g: f64| c * g + 2.0 * beta * (g * g.ln() - g + 1.0);
        let (mut lo, mut hi) = (1e-9, 2.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = hi - phi * (hi - lo);
            let x2 = lo + phi * (hi - lo);
            if f(x1) < f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        let g_star = 0.5 * (lo + hi);
        assert!((g_star - (-0.5f64).exp()).abs() < 1e-8);

        let g = TfGrid::dimensionless(2, 1).unwrap();
        let cost = BandedCost::new(&g, Band::Unlimited);
        let params = UotParams { rel_tol: 1e-15, max_iters: 20_000, ..UotParams::with_beta(beta) };
        let sol = solve_uot(&dist(&g, vec![1.0, 0.0]), &dist(&g, vec![0.0, 1.0]), &cost, &params).unwrap();
        assert!((sol.plan.mass(0, 1) - g_star).abs() < 1e-6, "{}", sol.plan.mass(0, 1));
        assert!(sol.max_objective_increase() <= 1e-10);
        assert!(sol.clamped_mass.0 > 0.0 && sol.clamped_mass.1 > 0.0);
    }

    #[test]
    fn descent_and_stationarity_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..8 {
            let g = TfGrid::dimensionless(rng.gen_range(2..5), rng.gen_range(1..4)).unwrap();
            let band = if rng.gen::<bool>() { Band::Limited(rng.gen_range(0..2)) } else { Band::Unlimited };
            let c = BandedCost::new(&g, band);
            let beta = rng.gen_range(0.2..3.0);
            let params = UotParams { rel_tol: 1e-15, max_iters: 200_000, ..UotParams::with_beta(beta) };
            let sol = solve_uot(&random_dist(&g, &mut rng), &random_dist(&g, &mut rng), &c, &params).unwrap();
            assert!(sol.max_objective_increase() <= 1e-10);
            assert!(sol.residual <= 1e-6 * beta, "residual {}", sol.residual);
            assert!(sol.plan.max_frame_displacement() <= band.reach(g.frames()));
        }
    }

    #[test]
    fn stationarity_tolerance_outlasts_a_stalled_objective() {
        // a zero source bin leaves tiny entries whose motion no longer moves
        // the objective in floating point
        let g = TfGrid::dimensionless(2, 2).unwrap();
        let xs = dist(&g, vec![0.6, 0.4, 0.0, 0.0]);
        let xt = dist(&g, vec![0.1, 0.2, 0.3, 0.4]);
        let c = BandedCost::new(&g, Band::Limited(0));
        let loose = UotParams { beta: 0.1, rel_tol: 1e-300, max_iters: 200_000, ..UotParams::default() };
        let strict = UotParams { stationarity_tol: Some(1e-6 * 0.1), ..loose.clone() };
        let a = solve_uot(&xs, &xt, &c, &loose).unwrap();
        let b = solve_uot(&xs, &xt, &c, &strict).unwrap();
        assert!(b.converged);
        assert!(b.iterations >= a.iterations);
        assert!(b.residual <= 1e-7);
        assert!(b.max_objective_increase() <= 1e-10);
    }

    #[test]
    fn observer_sees_every_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = TfGrid::dimensionless(3, 2).unwrap();
        let c = BandedCost::new(&g, Band::Limited(0));
        let mut records = Vec::new();
        let params = UotParams { max_iters: 25, rel_tol: 1e-300, ..UotParams::default() };
        let sol = UotSolver::new(params)
            .with_observer(|r| records.push(*r))
            .solve(&random_dist(&g, &mut rng), &random_dist(&g, &mut rng), &c)
            .unwrap();
        assert!(!sol.converged);
        assert_eq!(records.len(), 26);
        assert_eq!(records.last().unwrap().objective, sol.objective);
        assert!((records.last().unwrap().residual - sol.residual).abs() < 1e-12);
        assert!(records[0].to_csv().starts_with("0,"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = TfGrid::dimensionless(2, 1).unwrap();
        let c = BandedCost::new(&g, Band::Unlimited);
        let zero = dist(&g, vec![0.0, 0.0]);
        let one = dist(&g, vec![0.5, 0.5]);
        assert!(matches!(solve_uot(&zero, &one, &c, &UotParams::default()), Err(Error::EmptyMarginal("source"))));
        assert!(solve_uot(&one, &one, &c, &UotParams::with_beta(0.0)).is_err());
        assert!(solve_uot(&one, &one, &c, &UotParams { rel_tol: 0.0, ..UotParams::default() }).is_err());
        assert!(solve_uot(&one, &one, &c, &UotParams { stationarity_tol: Some(-1.0), ..UotParams::default() }).is_err());
    }
}
