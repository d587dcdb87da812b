//! First-price equilibrium bids, optimal reserves and the optimal
//! allocation rule, plus a damped best-response solver for the
//! two-bidder first-price auction with bid-dependent exercise timing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{MarketParams, ValueDistribution};
use crate::quadrature::{bisect, gauss_legendre2};
use crate::stopping::fpa_no_news_time;

fn check_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", format!("{p} not in (0, 1]")));
    }
    Ok((1.0 - p) / p)
}

/// Symmetric first-price equilibrium bid at `r = 0`:
/// `∫_lo^v y f(y) dy / ((1 − p)/p + F(v))`.
pub fn fpa_bid_closed_form(dist: &ValueDistribution, p: f64, v: f64) -> Result<f64> {
    dist.check_support(v)?;
    let k = check_p(p)?;
    let denom = k + dist.cdf(v);
    if denom == 0.0 {
        // p = 1 at the bottom of the support: the static bid tends to v.
        return Ok(v);
    }
    Ok(dist.partial_mean(v) / denom)
}

/// First-price bid with reserve `R` at `r = 0`; `None` (no bid) below `R`.
/// Solves the same first-order condition with boundary condition `β(R) = R`.
pub fn fpa_bid_with_reserve(dist: &ValueDistribution, p: f64, reserve: f64, v: f64) -> Result<Option<f64>> {
    dist.check_support(reserve)?;
    dist.check_support(v)?;
    let k = check_p(p)?;
    if v < reserve {
        return Ok(None);
    }
    if reserve <= dist.support_lo() {
        return fpa_bid_closed_form(dist, p, v).map(Some);
    }
    let denom = k + dist.cdf(v);
    if denom == 0.0 {
        return Ok(Some(v));
    }
    let above = dist.partial_mean(v) - dist.partial_mean(reserve);
    Ok(Some((above + (k + dist.cdf(reserve)) * reserve) / denom))
}

/// Root of the virtual value, or the bottom of the support when `φ > 0`
/// throughout (`root_found = false`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalReserve {
    pub reserve: f64,
    pub root_found: bool,
}

pub fn optimal_reserve(dist: &ValueDistribution) -> OptimalReserve {
    let lo = dist.support_lo();
    let hi = dist.support_hi();
    // sign(φ) = sign(v f − (1 − F)) wherever f > 0.
    let g = |v: f64| dist.virtual_density(v);
    if g(lo) > 0.0 {
        return OptimalReserve {
            reserve: lo,
            root_found: false,
        };
    }
    OptimalReserve {
        reserve: bisect(g, lo, hi, 1e-10),
        root_found: true,
    }
}

/// Winner of the revenue-optimal mechanism: the largest positive
/// quality-weighted virtual value, lower index on ties.
pub fn optimal_allocation(
    v1: f64,
    v2: f64,
    theta: [bool; 2],
    dist: &ValueDistribution,
) -> Result<Option<usize>> {
    let w = [v1, v2]
        .iter()
        .zip(theta)
        .map(|(&v, good)| -> Result<f64> {
            dist.check_support(v)?;
            if !good {
                return Ok(0.0);
            }
            Ok(dist.virtual_density(v) / dist.pdf(v).max(f64::MIN_POSITIVE))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(match (w[0] > 0.0, w[1] > 0.0) {
        (false, false) => None,
        (true, false) => Some(0),
        (false, true) => Some(1),
        (true, true) => Some(if w[1] > w[0] { 1 } else { 0 }),
    })
}

/// Discounted probability that a good ad bidding `b_own` is allocated
/// against `b_opp` in the two-bidder first-price auction, integrating the
/// opponent's quality and clock:
/// `p e^{−rT} w + (1 − p)[λ/(λ + r)(1 − e^{−(λ + r)T}) + e^{−(λ + r)T} w]`
/// with `w` the win indicator at the no-news time `T` (½ on ties).
pub fn allocation_prob_discounted(b_own: f64, b_opp: f64, params: &MarketParams) -> f64 {
    let w = if b_own > b_opp {
        1.0
    } else if b_own == b_opp {
        0.5
    } else {
        0.0
    };
    let p = params.p;
    if params.r == 0.0 {
        return (1.0 - p) + p * w;
    }
    let (lam, r) = (params.lambda, params.r);
    let t = fpa_no_news_time(b_own, b_opp, params);
    let both = (-(lam + r) * t).exp();
    p * (-r * t).exp() * w + (1.0 - p) * (lam / (lam + r) * (1.0 - both) + both * w)
}

/// A pure bidding strategy; `None` means no bid.
pub trait BidStrategy: Sync {
    fn bid(&self, v: f64) -> Option<f64>;

    /// Values where the strategy may have kinks.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Piecewise-linear bid function on a value grid. Values below the first
/// grid point do not bid; values above the last bid the last grid bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidFunction {
    pub grid_values: Vec<f64>,
    pub grid_bids: Vec<f64>,
}

impl BidFunction {
    pub fn new(grid_values: Vec<f64>, grid_bids: Vec<f64>) -> Result<Self> {
        if grid_values.len() < 2 || grid_values.len() != grid_bids.len() {
            return Err(invalid("grid", "need matching grids with at least two points"));
        }
        if grid_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid_values", "must be strictly increasing"));
        }
        Ok(Self {
            grid_values,
            grid_bids,
        })
    }

    pub fn is_monotone(&self) -> bool {
        self.grid_bids.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_individually_rational(&self) -> bool {
        self.grid_values
            .iter()
            .zip(&self.grid_bids)
            .all(|(&v, &b)| b >= 0.0 && b <= v + 1e-12)
    }

    pub fn sup_distance<S: BidStrategy>(&self, other: &S) -> f64 {
        self.grid_values
            .iter()
            .zip(&self.grid_bids)
            .map(|(&v, &b)| other.bid(v).map_or(f64::INFINITY, |o| (o - b).abs()))
            .fold(0.0, f64::max)
    }

    fn interpolate(&self, v: f64) -> Option<f64> {
        let x = &self.grid_values;
        let y = &self.grid_bids;
        if v < x[0] {
            return None;
        }
        let n = x.len();
        if v >= x[n - 1] {
            return Some(y[n - 1]);
        }
        let i = x.partition_point(|&g| g <= v) - 1;
        let t = (v - x[i]) / (x[i + 1] - x[i]);
        Some(y[i] + t * (y[i + 1] - y[i]))
    }
}

impl BidStrategy for BidFunction {
    fn bid(&self, v: f64) -> Option<f64> {
        self.interpolate(v)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.grid_values.clone()
    }
}

/// The `r = 0` closed-form strategy, with or without reserve.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormBids {
    pub dist: ValueDistribution,
    pub p: f64,
    pub reserve: f64,
}

impl BidStrategy for ClosedFormBids {
    fn bid(&self, v: f64) -> Option<f64> {
        fpa_bid_with_reserve(&self.dist, self.p, self.reserve, v).ok().flatten()
    }
}

/// Everyone bids the same amount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBid(pub f64);

impl BidStrategy for ConstantBid {
    fn bid(&self, _v: f64) -> Option<f64> {
        Some(self.0)
    }
}

/// Expected allocation `G(b) = E_{v_opp}[x(b, s(v_opp))]` against a
/// monotone opponent strategy `s`, and best responses to it.
pub struct BestResponse<'a, S: BidStrategy> {
    dist: &'a ValueDistribution,
    params: &'a MarketParams,
    reserve: f64,
    opponent: &'a S,
}

impl<'a, S: BidStrategy> BestResponse<'a, S> {
    pub fn new(dist: &'a ValueDistribution, params: &'a MarketParams, reserve: f64, opponent: &'a S) -> Self {
        Self {
            dist,
            params,
            reserve,
            opponent,
        }
    }

    // sup{v : pred(s(v))} for a predicate that holds on a lower set of values.
    fn crossing(&self, pred: impl Fn(Option<f64>) -> bool) -> f64 {
        let (mut lo, mut hi) = (self.dist.support_lo(), self.dist.support_hi());
        if pred(self.opponent.bid(hi)) {
            return hi;
        }
        if !pred(self.opponent.bid(lo)) {
            return lo;
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if pred(self.opponent.bid(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn allocation(&self, b: f64) -> f64 {
        let below = self.crossing(|o| o.is_none_or(|x| x < b));
        let at_most = self.crossing(|o| o.is_none_or(|x| x <= b));
        let (q_lt, q_le) = (self.dist.cdf(below), self.dist.cdf(at_most));
        let params = self.params;
        if params.r == 0.0 {
            return (1.0 - params.p) + params.p * (q_lt + 0.5 * (q_le - q_lt));
        }
        let x_tie = allocation_prob_discounted(b, b, params);
        let (lo, hi) = (self.dist.support_lo(), self.dist.support_hi());
        let mut knots = self.dist.knots();
        knots.extend(self.opponent.breakpoints().into_iter().filter(|v| (lo..=hi).contains(v)));
        knots.extend([below, at_most]);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let integrand = |v: f64| {
            let x = match self.opponent.bid(v) {
                None => 1.0,
                Some(o) if o == b => x_tie,
                Some(o) => allocation_prob_discounted(b, o, params),
            };
            x * self.dist.pdf(v)
        };
        // Values bidding exactly b form the plateau [below, at_most]; it
        // enters as a point mass.
        let mass = q_le - q_lt;
        let mut total = 0.0;
        for w in knots.windows(2) {
            if w[0] >= below && w[1] <= at_most && mass > 0.0 {
                continue;
            }
            let panels = ((w[1] - w[0]) / (hi - lo) * 32.0).ceil() as usize;
            total += gauss_legendre2(integrand, w[0], w[1], panels.max(1));
        }
        total + mass * x_tie
    }

    fn utility(&self, v: f64, b: f64) -> f64 {
        (v - b) * self.allocation(b)
    }

    /// Lowest utility-maximizing bid on `grid` among bids no greater than
    /// `v`, refined once by a short golden-section search over the
    /// neighbouring cells (kept only if it does better). `None` when `v` is
    /// below the reserve.
    pub fn best_response(&self, v: f64, grid: &[f64], refine: bool) -> Option<f64> {
        let g: Vec<f64> = grid.iter().map(|&b| self.allocation(b)).collect();
        self.best_response_tabulated(v, grid, &g, refine)
    }

    fn best_response_tabulated(&self, v: f64, grid: &[f64], g: &[f64], refine: bool) -> Option<f64> {
        if v < self.reserve {
            return None;
        }
        let u = |k: usize| (v - grid[k]) * g[k];
        let mut best = 0;
        let mut best_u = f64::NEG_INFINITY;
        for (k, &b) in grid.iter().enumerate() {
            if b > v && k > 0 {
                break;
            }
            if u(k) > best_u {
                best = k;
                best_u = u(k);
            }
        }
        if !refine || grid.len() < 2 {
            return Some(grid[best]);
        }
        // Golden-section search over the two cells around the grid argmax;
        // handles the kink where the argmax sits at an opponent's top bid.
        let mut lo = grid[best.saturating_sub(1)];
        let mut hi = grid[(best + 1).min(grid.len() - 1)].min(v).max(lo);
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut u1, mut u2) = (self.utility(v, x1), self.utility(v, x2));
        for _ in 0..GOLDEN_STEPS {
            if u1 >= u2 {
                hi = x2;
                x2 = x1;
                u2 = u1;
                x1 = hi - inv_phi * (hi - lo);
                u1 = self.utility(v, x1);
            } else {
                lo = x1;
                x1 = x2;
                u1 = u2;
                x2 = lo + inv_phi * (hi - lo);
                u2 = self.utility(v, x2);
            }
        }
        let (x, u) = if u1 >= u2 { (x1, u1) } else { (x2, u2) };
        Some(if u > best_u { x } else { grid[best] })
    }
}

const GOLDEN_STEPS: usize = 16;

/// Evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Best response of a value-`v` bidder on the grid `bid_grid` (refined
/// once around the maximizer) against `opponent`, without reserve.
pub fn fpa_best_response<S: BidStrategy>(
    dist: &ValueDistribution,
    params: &MarketParams,
    opponent: &S,
    v: f64,
    bid_grid: &[f64],
) -> f64 {
    BestResponse::new(dist, params, 0.0, opponent)
        .best_response(v, bid_grid, true)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub value_points: usize,
    pub bid_points: usize,
    pub refine: bool,
    /// Weight on the previous iterate.
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
    pub reserve: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            value_points: 512,
            bid_points: 1024,
            refine: true,
            damping: 0.5,
            tolerance: 1e-4,
            max_iters: 200,
            reserve: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub sup_norm_delta: f64,
    pub converged: bool,
    pub tolerance: f64,
}

/// Symmetric equilibrium of the two-bidder first-price auction by damped
/// best-response iteration from the `r = 0` closed form. Returns the last
/// iterate whether or not the tolerance was met.
pub fn fpa_equilibrium_solve(
    dist: &ValueDistribution,
    params: &MarketParams,
    opts: &SolverOptions,
) -> Result<(BidFunction, SolverReport)> {
    if params.n != 2 {
        return Err(Error::UnsupportedCombination(format!(
            "equilibrium solver is two-bidder only (n = {})",
            params.n
        )));
    }
    if opts.reserve > 0.0 && params.r > 0.0 {
        return Err(Error::UnsupportedCombination(
            "reserve with discounting".into(),
        ));
    }
    if !(opts.damping >= 0.0 && opts.damping < 1.0) {
        return Err(invalid("damping", "must lie in [0, 1)"));
    }
    if opts.value_points < 2 || opts.bid_points < 2 {
        return Err(invalid("grid", "need at least two points"));
    }
    let lo = dist.support_lo().max(opts.reserve);
    let hi = dist.support_hi();
    let values = linear_grid(lo, hi, opts.value_points);
    let bid_grid = linear_grid(lo.min(opts.reserve.max(dist.support_lo())), hi, opts.bid_points);
    let mut bids = values
        .iter()
        .map(|&v| Ok(fpa_bid_with_reserve(dist, params.p, opts.reserve, v)?.unwrap_or(v)))
        .collect::<Result<Vec<f64>>>()?;

    let mut report = SolverReport {
        iterations: 0,
        sup_norm_delta: f64::INFINITY,
        converged: false,
        tolerance: opts.tolerance,
    };
    while report.iterations < opts.max_iters {
        report.iterations += 1;
        let current = BidFunction::new(values.clone(), bids.clone())?;
        let br = BestResponse::new(dist, params, opts.reserve, &current);
        let g: Vec<f64> = bid_grid.par_iter().map(|&b| br.allocation(b)).collect();
        let response: Vec<f64> = values
            .par_iter()
            .map(|&v| {
                br.best_response_tabulated(v, &bid_grid, &g, opts.refine)
                    .unwrap_or(v)
            })
            .collect();
        // Monotone rearrangement of the damped update (sorting keeps the
        // distribution of bids; a running max would create flat pools).
        let mut next: Vec<f64> = bids
            .iter()
            .zip(&response)
            .map(|(&b, &target)| opts.damping * b + (1.0 - opts.damping) * target)
            .collect();
        next.sort_by(f64::total_cmp);
        let mut delta = 0.0f64;
        let mut worst = 0.0;
        for ((b, n), &v) in bids.iter_mut().zip(next).zip(&values) {
            let n = n.min(v).max(opts.reserve.min(v));
            if (n - *b).abs() > delta {
                worst = v;
            }
            delta = delta.max((n - *b).abs());
            *b = n;
        }
        log::debug!("largest change at v = {worst}");
        report.sup_norm_delta = delta;
        log::debug!("best-response iteration {}: delta {delta:.3e}", report.iterations);
        if delta <= opts.tolerance {
            report.converged = true;
            break;
        }
    }
    Ok((BidFunction::new(values, bids)?, report))
}

/// Witness that a second-price auction with reserve cannot implement the
/// optimal allocation: in any candidate equilibrium bids are capped at `2R`,
/// so a type `v̄ − ε` deviating above `2R` earns at least `v̄ − ε − 2R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationWitness {
    pub v_top: f64,
    pub reserve: f64,
    pub eps: f64,
    /// `v̄ > 2R` and `ε < (v̄ − 2R)/2`.
    pub precondition: bool,
    /// Lower bound `v̄ − ε − 2R` on the deviation profit.
    pub deviation_profit: f64,
}

impl DeviationWitness {
    pub fn profitable(&self) -> bool {
        self.deviation_profit > 0.0
    }
}

pub fn spa_reserve_deviation(dist: &ValueDistribution, reserve: f64, eps: f64) -> Result<DeviationWitness> {
    dist.check_support(reserve)?;
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let v_top = dist.support_hi();
    let cap = 2.0 * reserve;
    Ok(DeviationWitness {
        v_top,
        reserve,
        eps,
        precondition: v_top > cap && eps < (v_top - cap) / 2.0,
        deviation_profit: v_top - eps - cap,
    })
}
