//! Independent verification machinery.
//!
//! * [`dp_solve`]: value iteration for the pre-news stopping problem on a
//!   belief grid, sharing nothing with the closed forms in [`crate::stopping`].
//! * [`mc_allocation_prob`]: simulated discounted win probability.
//! * [`enumerate_expected_revenue`]: exact expected revenue for fixed bids by
//!   summing over quality outcomes.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::model::{logistic_step, logit, BidProfile};
use crate::rng::replication_rng;
use crate::stats::{replicate, RevenueEstimate};
use crate::stopping::{
    fpa_no_news_time, spa3_policy, spa_reserve_policy, AuctionFormat, AuctionSpec, ExerciseRule,
    StopKind,
};

type BeliefFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A symmetric pre-news stopping problem: all `n_active` bidders share the
/// belief `μ`, each bad ad's clock ticks at rate `λ(1 − μ)`, and time is
/// measured in units of `1/λ` so only `ρ = r/λ` enters.
pub struct DpSpec {
    /// Value of running the auction now.
    pub payoff_stop: BeliefFn,
    /// Sum over bidders of the value collected when that bidder's clock is
    /// the one that ticks, evaluated at the survivors' belief.
    pub jump_payoff: BeliefFn,
    /// Value of never stopping before news resolves quality (the pointwise
    /// limit, by enumeration of θ); used at the top of the belief grid.
    pub limit_payoff: BeliefFn,
    pub n_active: usize,
    pub rho: f64,
    /// Reporting grid spacing `Δμ`.
    pub grid_step: f64,
    /// Largest `λΔt` of the internal time discretization.
    pub max_time_step: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl DpSpec {
    fn base(stop: BeliefFn, jump: BeliefFn, limit: BeliefFn, n_active: usize, rho: f64) -> Self {
        Self {
            payoff_stop: stop,
            jump_payoff: jump,
            limit_payoff: limit,
            n_active,
            rho,
            grid_step: 1e-3,
            max_time_step: 1e-3,
            tolerance: 1e-10,
            max_sweeps: 50,
        }
    }

    /// Two-bidder second-price auction with reserve `R` (`r = 0`): after a
    /// tick the survivor pays `R`.
    pub fn spa_reserve(b2: f64, reserve: f64) -> Self {
        Self::base(
            Box::new(move |m| m * b2),
            Box::new(move |m| 2.0 * m * reserve),
            Box::new(move |m| m * m * b2 + 2.0 * m * (1.0 - m) * reserve),
            2,
            0.0,
        )
    }

    /// Two-bidder second-price auction without reserve: a tick leaves a
    /// survivor who pays nothing.
    pub fn spa_no_reserve(b2: f64) -> Self {
        Self::base(
            Box::new(move |m| m * b2),
            Box::new(|_| 0.0),
            Box::new(move |m| m * m * b2),
            2,
            0.0,
        )
    }

    /// Two-bidder first-price auction with discount ratio `ρ`: a tick hands
    /// the slot to the survivor at its own bid.
    pub fn fpa_discounted(b1: f64, b2: f64, rho: f64) -> Self {
        let hi = b1.max(b2);
        let lo = b1.min(b2);
        Self::base(
            Box::new(move |m| m * hi),
            Box::new(move |m| m * (hi + lo)),
            Box::new(move |m| {
                if rho > 0.0 {
                    0.0
                } else {
                    m * m * hi + m * (1.0 - m) * (hi + lo)
                }
            }),
            2,
            rho,
        )
    }

    /// Three-bidder second-price auction (`b1 ≥ b2 ≥ b3`, `r = 0`): a tick
    /// reduces to the two-bidder auction, which stops at once.
    pub fn spa_three(b2: f64, b3: f64) -> Self {
        let s = b2 + 2.0 * b3;
        Self::base(
            Box::new(move |m| m * b2),
            Box::new(move |m| m * s),
            Box::new(move |m| {
                m.powi(3) * b2 + m * m * (1.0 - m) * s + 0.5 * m * (1.0 - m).powi(2) * s
            }),
            3,
            0.0,
        )
    }

    pub fn with_grid_step(mut self, step: f64) -> Self {
        self.grid_step = step;
        self
    }
}

/// Value function and stopping region on the reporting grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DpResult {
    pub grid: Vec<f64>,
    pub value: Vec<f64>,
    pub stop_region: Vec<bool>,
    /// Smallest interior belief at which stopping is optimal, if any.
    pub boundary: Option<f64>,
    pub sweeps: usize,
    pub last_delta: f64,
}

impl DpResult {
    /// Interior stop flags form a single upper or lower interval (possibly
    /// empty or everything). The endpoints 0 and 1 are absorbing and excluded.
    pub fn has_interval_stop_region(&self) -> bool {
        let interior = &self.stop_region[1..self.stop_region.len() - 1];
        interior.windows(2).filter(|w| w[0] != w[1]).count() <= 1
    }

    pub fn value_at(&self, mu: f64) -> f64 {
        let step = self.grid[1] - self.grid[0];
        let i = ((mu / step).round() as usize).min(self.grid.len() - 1);
        self.value[i]
    }

    pub fn sup_distance<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.grid
            .iter()
            .zip(&self.value)
            .map(|(&m, &v)| (v - f(m)).abs())
            .fold(0.0, f64::max)
    }
}

const TOP_BELIEF: f64 = 1.0 - 1e-9;
const TIE_SLACK: f64 = 1e-12;

/// Solves the discretized Bellman equation
/// `V(μ) = max{stop(μ), e^{−ρΔ}[S(μ) V(μ′) + (1 − S(μ)) jump(μ_mid)/n]}`
/// where `μ′` is the exact news-free logistic update over `Δ`, `S` the
/// probability that no clock ticks, and the step `Δ` is chosen per grid
/// cell so `μ′` lands on the next node.
///
/// Nodes are swept from the top of the grid down (Gauss–Seidel); sweeps
/// repeat until the sup-norm change is below the tolerance.
pub fn dp_solve(spec: &DpSpec) -> Result<DpResult> {
    if !(spec.grid_step > 0.0 && spec.grid_step < 0.5) {
        return Err(Error::Domain(format!("grid step {} out of range", spec.grid_step)));
    }
    if !(spec.rho >= 0.0) || spec.n_active == 0 {
        return Err(Error::Domain("need rho ≥ 0 and at least one active bidder".into()));
    }
    let cells = (1.0 / spec.grid_step).round() as usize;
    let grid: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();

    // Fine nodes in log-odds from grid[1] up to TOP_BELIEF; coarse nodes are
    // hit exactly. `coarse_at[k]` is the fine index of grid[k] for 1 ≤ k < cells.
    let mut log_odds = Vec::new();
    let mut coarse_at = vec![usize::MAX; cells + 1];
    let h = spec.max_time_step;
    let push_segment = |from: f64, to: f64, nodes: &mut Vec<f64>| {
        let m = ((to - from) / h).ceil().max(1.0) as usize;
        for s in 0..m {
            nodes.push(from + (to - from) * s as f64 / m as f64);
        }
    };
    for k in 1..cells {
        coarse_at[k] = log_odds.len();
        let to = if k + 1 < cells { logit(grid[k + 1]) } else { logit(TOP_BELIEF) };
        push_segment(logit(grid[k]), to, &mut log_odds);
    }
    log_odds.push(logit(TOP_BELIEF));
    let mu: Vec<f64> = log_odds.iter().map(|&l| logistic_step(0.5, l)).collect();
    let nodes = mu.len();

    let n = spec.n_active as i32;
    let stop: Vec<f64> = mu.iter().map(|&m| (spec.payoff_stop)(m)).collect();
    // Per-node transition data: (discounted survival weight, discounted jump term).
    let trans: Vec<(f64, f64)> = (0..nodes - 1)
        .map(|j| {
            let d = log_odds[j + 1] - log_odds[j];
            let m = mu[j];
            let survive = (m + (1.0 - m) * (-d).exp()).powi(n);
            let mid = logistic_step(0.5, log_odds[j] + 0.5 * d);
            let jump = (1.0 - survive) * (-spec.rho * 0.5 * d).exp() * (spec.jump_payoff)(mid)
                / spec.n_active as f64;
            ((-spec.rho * d).exp() * survive, jump)
        })
        .collect();

    let mut value = stop.clone();
    let mut stopping = vec![true; nodes];
    value[nodes - 1] = stop[nodes - 1].max((spec.limit_payoff)(mu[nodes - 1]));
    let mut sweeps = 0;
    let mut delta = f64::INFINITY;
    while sweeps < spec.max_sweeps {
        sweeps += 1;
        delta = 0.0f64;
        for j in (0..nodes - 1).rev() {
            let (a, b) = trans[j];
            let cont = a * value[j + 1] + b;
            let new = stop[j].max(cont);
            // Ties go to stopping.
            stopping[j] = stop[j] >= cont - TIE_SLACK * cont.abs().max(1.0);
            delta = delta.max((new - value[j]).abs());
            value[j] = new;
        }
        if delta <= spec.tolerance {
            break;
        }
    }
    if delta > spec.tolerance {
        return Err(Error::NotConverged {
            iterations: sweeps,
            delta,
        });
    }

    let mut out_value = vec![0.0; cells + 1];
    let mut out_stop = vec![true; cells + 1];
    out_value[0] = (spec.payoff_stop)(0.0).max((spec.limit_payoff)(0.0));
    out_value[cells] = (spec.payoff_stop)(1.0).max((spec.limit_payoff)(1.0));
    for k in 1..cells {
        out_value[k] = value[coarse_at[k]];
        out_stop[k] = stopping[coarse_at[k]];
    }
    let boundary = (1..cells).find(|&k| out_stop[k]).map(|k| grid[k]);
    Ok(DpResult {
        grid,
        value: out_value,
        stop_region: out_stop,
        boundary,
        sweeps,
        last_delta: delta,
    })
}

/// Simulated discounted win probability of a bidder with a good ad bidding
/// `b_own` against `b_opp` in the two-bidder first-price auction: the
/// opponent's quality and clock are drawn, the stopping rule
/// `min{T, τ_opp}` applied, and `e^{−r·stop}·win` recorded (½ on tied bids).
pub fn mc_allocation_prob(
    b_own: f64,
    b_opp: f64,
    params: &crate::model::MarketParams,
    n_samples: u64,
    seed: u64,
) -> RevenueEstimate {
    let no_news = fpa_no_news_time(b_own, b_opp, params);
    let win_at_no_news = if b_own > b_opp {
        1.0
    } else if b_own == b_opp {
        0.5
    } else {
        0.0
    };
    let exp = Exp::new(params.lambda).expect("lambda validated positive");
    let m = replicate(n_samples, 1, |i, out| {
        let mut rng = replication_rng(seed, i);
        let opp_good = rng.random::<f64>() < params.p;
        let tick = if opp_good { f64::INFINITY } else { exp.sample(&mut rng) };
        out[0] = if tick < no_news {
            params.discount(tick)
        } else {
            params.discount(no_news) * win_at_no_news
        };
    });
    m.estimate(0, seed)
}

/// Exact expected revenue of `spec` at fixed `bids`, summing over the `2^n`
/// quality outcomes and integrating clock order statistics analytically.
pub fn enumerate_expected_revenue(spec: &AuctionSpec, bids: &BidProfile) -> Result<f64> {
    spec.check_supported()?;
    let params = &spec.params;
    let n = params.n;
    if n > 3 {
        return Err(Error::UnsupportedCombination(format!(
            "exact enumeration for {n} bidders"
        )));
    }
    if bids.len() != n {
        return Err(crate::error::invalid("bids", "length differs from n"));
    }
    let b = bids.as_slice();
    let p = params.p;
    let order = bids.ranking();
    let outcomes = |f: &dyn Fn(&[bool]) -> f64| -> f64 {
        (0..1u32 << n)
            .map(|mask| {
                let theta: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let good = theta.iter().filter(|&&g| g).count() as i32;
                let w = p.powi(good) * (1.0 - p).powi(n as i32 - good);
                if w == 0.0 {
                    0.0
                } else {
                    w * f(&theta)
                }
            })
            .sum()
    };
    // Highest bid among good ads meeting `floor`, lowest index first.
    let best_good = |theta: &[bool], floor: f64| -> f64 {
        order
            .iter()
            .find(|&&i| theta[i] && b[i] >= floor)
            .map_or(0.0, |&i| b[i])
    };
    let second_good = |theta: &[bool]| -> f64 {
        order.iter().filter(|&&i| theta[i]).nth(1).map_or(0.0, |&i| b[i])
    };

    if spec.rule == ExerciseRule::FirstPriceTiming {
        return Ok(match spec.format {
            AuctionFormat::FirstPrice => outcomes(&|t| best_good(t, 0.0)),
            AuctionFormat::SecondPrice => outcomes(&|t| second_good(t)),
        });
    }

    Ok(match spec.format {
        AuctionFormat::SecondPrice if spec.reserve > 0.0 => {
            let reserve = spec.reserve;
            let (hi, lo) = (b[order[0]], b[order[1]]);
            match spa_reserve_policy(bids, reserve) {
                None => 0.0,
                Some(_) if lo < reserve => p * reserve,
                Some(d) if d.kind == StopKind::StopNow => p * lo,
                Some(_) => {
                    // Continue: both good clears at the limit at `lo`; one good
                    // survives a tick and pays the reserve.
                    let _ = hi;
                    p * p * lo + 2.0 * p * (1.0 - p) * reserve
                }
            }
        }
        AuctionFormat::SecondPrice if n == 3 => {
            let (b2, b3) = (b[order[1]], b[order[2]]);
            if spa3_policy(b[order[0]], b2, b3).kind == StopKind::StopNow {
                p * b2
            } else {
                outcomes(&|theta| {
                    let bad: Vec<usize> = (0..n).filter(|&i| !theta[i]).collect();
                    if bad.is_empty() {
                        return b2;
                    }
                    // The first tick is equally likely to come from any bad ad;
                    // the survivors' second-price auction then clears.
                    bad.iter()
                        .map(|&j| {
                            let surv: Vec<usize> = order.iter().copied().filter(|&i| i != j).collect();
                            if theta[surv[0]] {
                                b[surv[1]]
                            } else {
                                0.0
                            }
                        })
                        .sum::<f64>()
                        / bad.len() as f64
                })
            }
        }
        AuctionFormat::SecondPrice => p * b[order[1]],
        AuctionFormat::FirstPrice if spec.reserve > 0.0 => outcomes(&|t| best_good(t, spec.reserve)),
        AuctionFormat::FirstPrice if params.r > 0.0 => {
            let (lam, r) = (params.lambda, params.r);
            let t_bar = fpa_no_news_time(b[0], b[1], params);
            // E[e^{−rτ}; τ < T] and P(τ ≥ T)·e^{−rT} for τ ~ Exp(λ).
            let tick_first = lam / (lam + r) * (1.0 - (-(lam + r) * t_bar).exp());
            let no_tick = (-(lam + r) * t_bar).exp();
            let top = order[0];
            outcomes(&|theta| match (theta[0], theta[1]) {
                (true, true) => b[top] * (-r * t_bar).exp(),
                (true, false) | (false, true) => {
                    let i = if theta[0] { 0 } else { 1 };
                    b[i] * (tick_first + if top == i { no_tick } else { 0.0 })
                }
                (false, false) => 0.0,
            })
        }
        AuctionFormat::FirstPrice => outcomes(&|t| best_good(t, 0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketParams;
    use crate::stopping::{fpa_value, spa3_value, spa_reserve_value};

    fn spec(format: AuctionFormat, reserve: f64, p: f64, r: f64, n: usize) -> AuctionSpec {
        AuctionSpec::new(format, reserve, MarketParams::new(p, 1.0, r, n).unwrap()).unwrap()
    }

    #[test]
    fn dp_spa_reserve_matches_quadratic() {
        let res = dp_solve(&DpSpec::spa_reserve(0.6, 0.4)).unwrap();
        let d = res.sup_distance(|m| (0.6 - 0.8) * m * m + 0.8 * m);
        assert!(d < 1e-3, "{d}");
        assert!(res.has_interval_stop_region());
        assert_eq!(res.boundary, None);
        assert!((res.value_at(0.5) - 0.35).abs() < 1e-3);
    }

    #[test]
    fn dp_spa_without_reserve_stops_everywhere() {
        let res = dp_solve(&DpSpec::spa_no_reserve(0.7)).unwrap();
        assert!(res.stop_region.iter().all(|&s| s));
        assert!(res.sup_distance(|m| 0.7 * m) < 1e-12);
    }

    #[test]
    fn dp_discounted_fpa_boundary() {
        let res = dp_solve(&DpSpec::fpa_discounted(1.0, 1.0, 0.1)).unwrap();
        let boundary = res.boundary.unwrap();
        assert!((boundary - 0.9).abs() <= 1e-3 + 1e-12, "{boundary}");
        let v = stopping_value(0.5, 1.0, 1.0, 0.1);
        assert!((res.value_at(0.5) - v).abs() < 1e-2);
        assert!(res.has_interval_stop_region());
    }

    fn stopping_value(mu: f64, b1: f64, b2: f64, rho: f64) -> f64 {
        fpa_value(mu, b1, b2, rho).unwrap()
    }

    #[test]
    fn dp_three_bidder_continuation() {
        let res = dp_solve(&DpSpec::spa_three(0.5, 0.3)).unwrap();
        assert!(res.sup_distance(|m| spa3_value(m, 0.5, 0.3).unwrap()) < 1e-3);
        let res = dp_solve(&DpSpec::spa_three(0.8, 0.3)).unwrap();
        assert!(res.stop_region.iter().all(|&s| s));
    }

    #[test]
    fn dp_converges_in_two_sweeps() {
        let res = dp_solve(&DpSpec::spa_reserve(0.6, 0.4)).unwrap();
        assert_eq!(res.sweeps, 2);
        assert!(res.last_delta <= 1e-10);
    }

    #[test]
    fn dp_rejects_bad_grid() {
        assert!(dp_solve(&DpSpec::spa_reserve(0.6, 0.4).with_grid_step(0.0)).is_err());
    }

    #[test]
    fn mc_allocation_at_r0() {
        let m = MarketParams::new(0.5, 1.0, 0.0, 2).unwrap();
        let e = mc_allocation_prob(0.6, 0.4, &m, 10_000, 1);
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
        let e = mc_allocation_prob(0.3, 0.4, &m, 1_000_000, 2);
        assert!(e.within(0.5, 3.0), "{e:?}");
    }

    #[test]
    fn enumeration_examples() {
        let b = BidProfile::new(vec![0.9, 0.4]).unwrap();
        let v = enumerate_expected_revenue(&spec(AuctionFormat::SecondPrice, 0.0, 0.5, 0.0, 2), &b).unwrap();
        assert!((v - 0.2).abs() < 1e-15);
        let v = enumerate_expected_revenue(&spec(AuctionFormat::FirstPrice, 0.0, 0.5, 0.0, 2), &b).unwrap();
        assert!((v - (0.25 * 0.9 + 0.25 * 0.9 + 0.25 * 0.4)).abs() < 1e-15);
        let b = BidProfile::new(vec![0.9, 0.6]).unwrap();
        let v = enumerate_expected_revenue(&spec(AuctionFormat::SecondPrice, 0.4, 0.5, 0.0, 2), &b).unwrap();
        assert!((v - 0.35).abs() < 1e-15);
        assert!((v - spa_reserve_value(0.5, 0.6, 0.4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn enumeration_three_bidders_matches_value_function() {
        for &(b1, b2, b3) in &[(1.0, 0.5, 0.3), (1.0, 0.8, 0.3), (0.7, 0.7, 0.5)] {
            let b = BidProfile::new(vec![b3, b1, b2]).unwrap();
            for &p in &[0.2, 0.5, 0.9] {
                let v = enumerate_expected_revenue(&spec(AuctionFormat::SecondPrice, 0.0, p, 0.0, 3), &b)
                    .unwrap();
                assert!((v - spa3_value(p, b2, b3).unwrap()).abs() < 1e-14, "{b1} {b2} {b3} {p}");
            }
        }
    }

    #[test]
    fn enumeration_discounted_fpa_matches_value_function() {
        // Below the threshold, the closed-form value at μ = p is the expected
        // revenue of running the optimal policy from time 0.
        let b = BidProfile::new(vec![1.0, 0.8]).unwrap();
        for &rho in &[0.05, 0.1] {
            let s = spec(AuctionFormat::FirstPrice, 0.0, 0.5, rho, 2);
            let v = enumerate_expected_revenue(&s, &b).unwrap();
            assert!((v - fpa_value(0.5, 1.0, 0.8, rho).unwrap()).abs() < 1e-12, "{rho}");
        }
    }

    #[test]
    fn enumeration_rejects_large_n() {
        let b = BidProfile::new(vec![0.5; 4]).unwrap();
        assert!(enumerate_expected_revenue(&spec(AuctionFormat::FirstPrice, 0.0, 0.5, 0.0, 4), &b).is_err());
    }
}
