//! Optimal exercise policies, closed-form auctioneer value functions and the
//! unified executor that turns a bid profile and a sampled world into an
//! [`Outcome`].
//!
//! Timing conventions: times are in the same units as `1/λ`; `f64::INFINITY`
//! means the auction runs "at the limit", which for `r = 0` is evaluated as
//! the exact pointwise limit of beliefs (`μ_i → θ_i`), never by truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{belief_no_news, logit, BidProfile, MarketParams, WorldRealization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuctionFormat {
    FirstPrice,
    SecondPrice,
}

impl AuctionFormat {
    pub fn name(self) -> &'static str {
        match self {
            AuctionFormat::FirstPrice => "first",
            AuctionFormat::SecondPrice => "second",
        }
    }
}

/// Which stopping rule the executor applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ExerciseRule {
    /// The auctioneer's optimal policy for the committed format.
    #[default]
    Optimal,
    /// Run at the first-price optimal time (first moment a single bidder is
    /// left, else the limit) regardless of format. Only meaningful for the
    /// bid-independent `r = 0`, no-reserve case.
    FirstPriceTiming,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuctionSpec {
    pub format: AuctionFormat,
    /// Per-click reserve; 0 means none.
    pub reserve: f64,
    pub params: MarketParams,
    pub rule: ExerciseRule,
}

impl AuctionSpec {
    pub fn new(format: AuctionFormat, reserve: f64, params: MarketParams) -> Result<Self> {
        if !(reserve >= 0.0 && reserve.is_finite()) {
            return Err(crate::error::invalid("reserve", "must be finite and nonnegative"));
        }
        Ok(Self {
            format,
            reserve,
            params,
            rule: ExerciseRule::Optimal,
        })
    }

    pub fn with_rule(mut self, rule: ExerciseRule) -> Self {
        self.rule = rule;
        self
    }

    /// Rejects cells of the format × reserve × discount × n matrix that have
    /// no characterized policy.
    pub fn check_supported(&self) -> Result<()> {
        let n = self.params.n;
        let r = self.params.r;
        let reserve = self.reserve > 0.0;
        let unsupported = |why: &str| Err(Error::UnsupportedCombination(format!("{}: {why}", self.describe())));
        if self.rule == ExerciseRule::FirstPriceTiming && (reserve || r > 0.0) {
            return unsupported("first-price timing only without reserve at r = 0");
        }
        if reserve && r > 0.0 {
            return unsupported("reserve prices with discounting");
        }
        if reserve && n != 2 {
            return unsupported("reserve prices need exactly two bidders");
        }
        if r > 0.0 && n != 2 {
            return unsupported("discounting needs exactly two bidders");
        }
        if self.format == AuctionFormat::SecondPrice
            && self.rule == ExerciseRule::Optimal
            && n > 3
        {
            return unsupported("second-price policy is characterized for at most three bidders");
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        format!(
            "{}-price, reserve {}, r {}, n {}",
            self.format.name(),
            self.reserve,
            self.params.r,
            self.params.n
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopKind {
    /// τ = 0.
    StopNow,
    /// τ = first bad-news arrival (or the limit if none ever arrives).
    ContinueUntilNews,
    /// τ = ∞.
    StopAtLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub kind: StopKind,
    pub note: String,
}

impl PolicyDecision {
    fn new(kind: StopKind, note: impl Into<String>) -> Self {
        Self {
            kind,
            note: note.into(),
        }
    }
}

/// Realized result of running an auction in one world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub winner: Option<usize>,
    pub payment_if_clicked: f64,
    pub exercise_time: f64,
    /// `θ_winner · payment · e^{−r τ}`.
    pub realized_revenue: f64,
}

impl Outcome {
    fn no_sale(time: f64) -> Self {
        Self {
            winner: None,
            payment_if_clicked: 0.0,
            exercise_time: time,
            realized_revenue: 0.0,
        }
    }
}

/// Second-price timing without reserve: the min of two martingales is a
/// supermartingale, so stop at 0 for every bid profile (and every `r ≥ 0`).
pub fn spa_stop(_bids: &BidProfile) -> PolicyDecision {
    PolicyDecision::new(StopKind::StopNow, "revenue process is a supermartingale")
}

/// First-price limit revenue for two bidders at `r = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitRevenue {
    pub exercise_time: f64,
    pub revenue: f64,
}

/// First-price timing without reserve at `r = 0`: the revenue process is a
/// submartingale, so the auction runs at the limit and collects
/// `max{b_i : θ_i = 1}`.
pub fn fpa_stop(bids: &BidProfile, world: &WorldRealization) -> LimitRevenue {
    let revenue = bids
        .as_slice()
        .iter()
        .zip(world.theta())
        .filter(|(_, &good)| good)
        .map(|(&b, _)| b)
        .fold(0.0, f64::max);
    LimitRevenue {
        exercise_time: f64::INFINITY,
        revenue,
    }
}

/// Second-price timing with reserve `R` for two bidders at `r = 0`.
/// Returns `None` when neither bid meets the reserve.
pub fn spa_reserve_policy(bids: &BidProfile, reserve: f64) -> Option<PolicyDecision> {
    let (hi, lo) = top_two(bids.as_slice());
    if hi < reserve {
        return None;
    }
    Some(if lo < reserve {
        PolicyDecision::new(StopKind::StopNow, "single eligible bidder; indifferent, stop")
    } else if lo >= 2.0 * reserve {
        PolicyDecision::new(StopKind::StopNow, "second bid at least twice the reserve")
    } else {
        PolicyDecision::new(
            StopKind::ContinueUntilNews,
            "reserve backstop beats the current second bid",
        )
    })
}

/// Pre-news auctioneer value for the two-bidder second-price auction with
/// reserve: `μ b2` if `b2 ≥ 2R`, else `(b2 − 2R) μ² + 2R μ`.
pub fn spa_reserve_value(mu: f64, b2: f64, reserve: f64) -> Result<f64> {
    check_belief(mu)?;
    Ok(if b2 >= 2.0 * reserve {
        mu * b2
    } else {
        (b2 - 2.0 * reserve) * mu * mu + 2.0 * reserve * mu
    })
}

/// Discounted first-price stopping belief `max{1 − ρ b1/b2, p}` (`b1 ≥ b2 > 0`).
pub fn fpa_discount_threshold(b1: f64, b2: f64, params: &MarketParams) -> Result<f64> {
    if b2 <= 0.0 {
        return Err(Error::ZeroBid);
    }
    let (b1, b2) = if b1 >= b2 { (b1, b2) } else { (b2, b1) };
    Ok((1.0 - params.rho() * b1 / b2).max(params.p))
}

/// News-free time for the belief to climb from `mu0` to `mu_bar`.
pub fn no_news_stop_time(mu0: f64, mu_bar: f64, lambda: f64) -> Result<f64> {
    if !(mu0 > 0.0 && mu0 < 1.0) {
        return Err(Error::Domain(format!("initial belief {mu0} not in (0, 1)")));
    }
    if mu_bar <= mu0 {
        return Ok(0.0);
    }
    if mu_bar >= 1.0 {
        return Err(Error::Domain(
            "threshold 1 is only reached in the limit; use the r = 0 branch".into(),
        ));
    }
    Ok((logit(mu_bar) - logit(mu0)) / lambda)
}

/// First-price no-news exercise time for a bid pair: `∞` at `r = 0`, 0 when
/// the threshold is already met (or a bid is zero).
pub fn fpa_no_news_time(b_a: f64, b_b: f64, params: &MarketParams) -> f64 {
    if params.r == 0.0 {
        return f64::INFINITY;
    }
    let lo = b_a.min(b_b);
    let hi = b_a.max(b_b);
    if lo <= 0.0 || params.p <= 0.0 || params.p >= 1.0 {
        return 0.0;
    }
    let mu_bar = 1.0 - params.rho() * hi / lo;
    if mu_bar <= params.p {
        0.0
    } else {
        (logit(mu_bar) - logit(params.p)) / params.lambda
    }
}

/// Continuation value of the discounted first-price auction below the free
/// boundary `mu_bar = 1 − ρ b1/b2`.
pub fn fpa_discount_value(mu: f64, b1: f64, b2: f64, rho: f64, mu_bar: f64) -> Result<f64> {
    if !(mu_bar > 0.0 && mu_bar < 1.0) {
        return Err(Error::Domain(format!("threshold {mu_bar} not in (0, 1)")));
    }
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho {rho} must be positive")));
    }
    if !(b1 >= b2 && b2 > 0.0) {
        return Err(Error::Domain("need b1 ≥ b2 > 0".into()));
    }
    if !(mu > 0.0 && mu <= mu_bar) {
        return Err(Error::Domain(format!("belief {mu} not in (0, {mu_bar}]")));
    }
    let odds = (mu * (1.0 - mu_bar) / (mu_bar * (1.0 - mu))).powf(rho);
    Ok(mu * (1.0 - mu) * (b1 + b2) / (rho + 1.0) + b1 / (1.0 + rho) * mu * mu * odds)
}

/// Optimal pre-news value of the two-bidder first-price auction on all of
/// `[0, 1]`: the continuation solution below the boundary, `μ b1` above it,
/// and the limit value `μ² b1 + μ(1 − μ)(b1 + b2)` when `ρ = 0`.
pub fn fpa_value(mu: f64, b1: f64, b2: f64, rho: f64) -> Result<f64> {
    check_belief(mu)?;
    let (b1, b2) = if b1 >= b2 { (b1, b2) } else { (b2, b1) };
    if rho == 0.0 {
        return Ok(mu * mu * b1 + mu * (1.0 - mu) * (b1 + b2));
    }
    if b2 == 0.0 {
        return Ok(mu * b1);
    }
    let mu_bar = 1.0 - rho * b1 / b2;
    if mu == 0.0 || mu >= mu_bar || mu_bar <= 0.0 {
        Ok(mu * b1)
    } else {
        fpa_discount_value(mu, b1, b2, rho, mu_bar)
    }
}

/// Three-bidder second-price timing (`b1 ≥ b2 ≥ b3`, `r = 0`, no reserve).
pub fn spa3_policy(_b1: f64, b2: f64, b3: f64) -> PolicyDecision {
    if b2 >= 2.0 * b3 {
        PolicyDecision::new(StopKind::StopNow, "third bid too weak to justify waiting")
    } else {
        PolicyDecision::new(
            StopKind::ContinueUntilNews,
            "wait for the first bad news, then run the two-bidder auction",
        )
    }
}

/// Three-bidder second-price pre-news value.
pub fn spa3_value(mu: f64, b2: f64, b3: f64) -> Result<f64> {
    check_belief(mu)?;
    Ok(if b2 >= 2.0 * b3 {
        mu * b2
    } else {
        0.5 * (b2 - 2.0 * b3) * mu.powi(3) + 0.5 * (b2 + 2.0 * b3) * mu
    })
}

/// First-price timing for `n ≥ 2` bidders at `r = 0`: revenue is the best
/// bid among good ads; the reported exercise time is the first moment only
/// one bidder has a positive belief (∞ if at least two ads are good).
pub fn fpa_n_stop(bids: &BidProfile, world: &WorldRealization) -> Outcome {
    let limit = settle_first_price(bids.as_slice(), &limit_beliefs(world), 0.0);
    let ticks = world.sorted_ticks();
    let n = world.n();
    let exercise_time = if ticks.len() >= n - 1 {
        ticks[n - 2]
    } else {
        f64::INFINITY
    };
    finish(limit, world, exercise_time, 1.0)
}

/// Knobs for fault injection in negative-control tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExerciseOptions {
    /// Floor second-price payments at the reserve.
    pub floor_at_reserve: bool,
}

impl Default for ExerciseOptions {
    fn default() -> Self {
        Self {
            floor_at_reserve: true,
        }
    }
}

/// Runs the auction described by `spec` on `bids` in `world`.
pub fn exercise(spec: &AuctionSpec, bids: &BidProfile, world: &WorldRealization) -> Result<Outcome> {
    exercise_with(spec, bids, world, &ExerciseOptions::default())
}

pub fn exercise_with(
    spec: &AuctionSpec,
    bids: &BidProfile,
    world: &WorldRealization,
    opts: &ExerciseOptions,
) -> Result<Outcome> {
    spec.check_supported()?;
    let params = &spec.params;
    if bids.len() != params.n || world.n() != params.n {
        return Err(crate::error::invalid(
            "bids",
            format!("{} bids and {} world coordinates for n = {}", bids.len(), world.n(), params.n),
        ));
    }
    let b = bids.as_slice();
    let reserve = spec.reserve;

    if spec.rule == ExerciseRule::FirstPriceTiming {
        let t = fpa_n_stop(bids, world).exercise_time;
        let mu = beliefs_at(params, world, t)?;
        let settled = match spec.format {
            AuctionFormat::FirstPrice => settle_first_price(b, &mu, 0.0),
            AuctionFormat::SecondPrice => settle_second_price(b, &mu, 0.0, true),
        };
        return Ok(finish(settled, world, t, params.discount(t)));
    }

    match spec.format {
        AuctionFormat::SecondPrice if reserve > 0.0 => {
            let Some(decision) = spa_reserve_policy(bids, reserve) else {
                return Ok(Outcome::no_sale(0.0));
            };
            let t = match decision.kind {
                StopKind::StopNow => 0.0,
                _ => world.first_tick().map_or(f64::INFINITY, |(_, t)| t),
            };
            let mu = beliefs_at(params, world, t)?;
            let settled = settle_second_price(b, &mu, reserve, opts.floor_at_reserve);
            Ok(finish(settled, world, t, 1.0))
        }
        AuctionFormat::SecondPrice if params.n == 3 => {
            let order = bids.ranking();
            let decision = spa3_policy(b[order[0]], b[order[1]], b[order[2]]);
            let t = match decision.kind {
                StopKind::StopNow => 0.0,
                _ => world.first_tick().map_or(f64::INFINITY, |(_, t)| t),
            };
            // After the first tick the two survivors' auction stops at once.
            let mu = beliefs_at(params, world, t)?;
            Ok(finish(settle_second_price(b, &mu, 0.0, true), world, t, 1.0))
        }
        AuctionFormat::SecondPrice => {
            let _ = spa_stop(bids);
            let mu = vec![params.p; params.n];
            Ok(finish(settle_second_price(b, &mu, 0.0, true), world, 0.0, 1.0))
        }
        AuctionFormat::FirstPrice if reserve > 0.0 => {
            let settled = settle_first_price(b, &limit_beliefs(world), reserve);
            Ok(finish(settled, world, f64::INFINITY, 1.0))
        }
        AuctionFormat::FirstPrice if params.r > 0.0 => {
            let no_news = fpa_no_news_time(b[0], b[1], params);
            let (t, mu) = match world.first_tick() {
                Some((_, tick)) if tick < no_news => (tick, beliefs_at(params, world, tick)?),
                _ => (no_news, beliefs_at(params, world, no_news)?),
            };
            let settled = settle_first_price(b, &mu, 0.0);
            Ok(finish(settled, world, t, params.discount(t)))
        }
        AuctionFormat::FirstPrice => Ok(fpa_n_stop(bids, world)),
    }
}

// Beliefs at time t; the limit t = ∞ resolves to θ.
fn beliefs_at(params: &MarketParams, world: &WorldRealization, t: f64) -> Result<Vec<f64>> {
    if t == f64::INFINITY {
        return Ok(limit_beliefs(world));
    }
    let common = belief_no_news(params, t)?;
    Ok(world
        .clocks()
        .iter()
        .map(|&c| if t >= c { 0.0 } else { common })
        .collect())
}

fn limit_beliefs(world: &WorldRealization) -> Vec<f64> {
    world.theta().iter().map(|&g| if g { 1.0 } else { 0.0 }).collect()
}

struct Settlement {
    winner: Option<usize>,
    payment: f64,
}

fn eligible(b: f64, mu: f64, reserve: f64) -> bool {
    mu > 0.0 && b >= reserve
}

// Highest scored bid among eligible bidders; lowest index on ties.
fn scored_winner(bids: &[f64], mu: &[f64], reserve: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..bids.len() {
        if !eligible(bids[i], mu[i], reserve) {
            continue;
        }
        match best {
            Some(w) if mu[w] * bids[w] >= mu[i] * bids[i] => {}
            _ => best = Some(i),
        }
    }
    best
}

fn settle_first_price(bids: &[f64], mu: &[f64], reserve: f64) -> Settlement {
    match scored_winner(bids, mu, reserve) {
        Some(w) => Settlement {
            winner: Some(w),
            payment: bids[w],
        },
        None => Settlement {
            winner: None,
            payment: 0.0,
        },
    }
}

// Winner pays the runner-up's scored bid divided by its own belief, floored
// at the reserve.
fn settle_second_price(bids: &[f64], mu: &[f64], reserve: f64, floor: bool) -> Settlement {
    let Some(w) = scored_winner(bids, mu, reserve) else {
        return Settlement {
            winner: None,
            payment: 0.0,
        };
    };
    let runner_up = (0..bids.len())
        .filter(|&j| j != w && eligible(bids[j], mu[j], reserve))
        .map(|j| mu[j] * bids[j])
        .fold(0.0, f64::max);
    let price = runner_up / mu[w];
    Settlement {
        winner: Some(w),
        payment: if floor { price.max(reserve) } else { price },
    }
}

fn finish(s: Settlement, world: &WorldRealization, t: f64, discount: f64) -> Outcome {
    let realized_revenue = match s.winner {
        Some(w) if world.is_good(w) => s.payment * discount,
        _ => 0.0,
    };
    Outcome {
        winner: s.winner,
        payment_if_clicked: s.payment,
        exercise_time: t,
        realized_revenue,
    }
}

fn top_two(b: &[f64]) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for &x in b {
        if x > hi {
            lo = hi;
            hi = x;
        } else if x > lo {
            lo = x;
        }
    }
    (hi, lo.max(0.0))
}

fn check_belief(mu: f64) -> Result<()> {
    if (0.0..=1.0).contains(&mu) {
        Ok(())
    } else {
        Err(Error::Domain(format!("belief {mu} not in [0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const INF: f64 = f64::INFINITY;

    fn bids(b: &[f64]) -> BidProfile {
        BidProfile::new(b.to_vec()).unwrap()
    }

    fn world(clocks: &[f64]) -> WorldRealization {
        WorldRealization::from_clocks(clocks.to_vec()).unwrap()
    }

    fn params(p: f64, r: f64, n: usize) -> MarketParams {
        MarketParams::new(p, 1.0, r, n).unwrap()
    }

    #[test]
    fn spa_always_stops() {
        for b in [[0.9, 0.4], [0.4, 0.4], [0.0, 0.0]] {
            assert_eq!(spa_stop(&bids(&b)).kind, StopKind::StopNow);
        }
    }

    #[test]
    fn fpa_limit_revenue() {
        let b = bids(&[0.9, 0.4]);
        assert_eq!(fpa_stop(&b, &world(&[INF, INF])).revenue, 0.9);
        assert_eq!(fpa_stop(&b, &world(&[1.0, INF])).revenue, 0.4);
        let r = fpa_stop(&b, &world(&[1.0, 2.0]));
        assert_eq!(r.revenue, 0.0);
        assert_eq!(r.exercise_time, INF);
    }

    #[test]
    fn spa_reserve_policy_cases() {
        let k = |b: &[f64]| spa_reserve_policy(&bids(b), 0.4).map(|d| d.kind);
        assert_eq!(k(&[0.9, 0.85]), Some(StopKind::StopNow));
        assert_eq!(k(&[0.9, 0.6]), Some(StopKind::ContinueUntilNews));
        assert_eq!(k(&[0.3, 0.2]), None);
        assert_eq!(k(&[0.9, 0.2]), Some(StopKind::StopNow));
        // b2 = 2R exactly stops.
        assert_eq!(k(&[0.9, 0.8]), Some(StopKind::StopNow));
        // order of bidders is irrelevant
        assert_eq!(k(&[0.6, 0.9]), Some(StopKind::ContinueUntilNews));
    }

    #[test]
    fn spa_reserve_value_examples() {
        assert_abs_diff_eq!(spa_reserve_value(0.5, 0.6, 0.4).unwrap(), 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(spa_reserve_value(1.0, 0.6, 0.4).unwrap(), 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(spa_reserve_value(0.5, 0.9, 0.4).unwrap(), 0.45, epsilon = 1e-15);
        assert!(spa_reserve_value(1.2, 0.6, 0.4).is_err());
    }

    #[test]
    fn threshold_examples() {
        let m = params(0.5, 0.1, 2);
        assert_abs_diff_eq!(fpa_discount_threshold(1.0, 1.0, &m).unwrap(), 0.9, epsilon = 1e-15);
        assert_eq!(fpa_discount_threshold(1.0, 0.05, &m).unwrap(), 0.5);
        assert_eq!(fpa_discount_threshold(1.0, 0.0, &m), Err(Error::ZeroBid));
        let tiny = params(0.5, 1e-9, 2);
        assert!(fpa_discount_threshold(1.0, 0.5, &tiny).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn no_news_time_examples() {
        assert_abs_diff_eq!(no_news_stop_time(0.5, 0.9, 1.0).unwrap(), 9f64.ln(), epsilon = 1e-14);
        assert_eq!(no_news_stop_time(0.6, 0.6, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            no_news_stop_time(0.5, 0.9, 2.0).unwrap(),
            0.5 * 9f64.ln(),
            epsilon = 1e-14
        );
        assert!(no_news_stop_time(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn no_news_time_matches_belief_integration() {
        // Integrate dμ = μ(1 − μ) dt with RK4 until μ crosses 0.9.
        let (mut mu, mut t, h) = (0.5f64, 0.0f64, 1e-4);
        let f = |m: f64| m * (1.0 - m);
        while mu < 0.9 {
            let k1 = f(mu);
            let k2 = f(mu + 0.5 * h * k1);
            let k3 = f(mu + 0.5 * h * k2);
            let k4 = f(mu + h * k3);
            mu += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        assert!((t - no_news_stop_time(0.5, 0.9, 1.0).unwrap()).abs() < 2e-4);
    }

    #[test]
    fn discount_value_pasting() {
        for &(b1, b2, rho) in &[(1.0, 1.0, 0.1), (1.0, 0.8, 0.05), (2.0, 1.5, 0.3)] {
            let mu_bar = 1.0 - rho * b1 / b2;
            let v = fpa_discount_value(mu_bar, b1, b2, rho, mu_bar).unwrap();
            assert_abs_diff_eq!(v, mu_bar * b1, epsilon = 1e-12);
            let h = 1e-7;
            let left = fpa_discount_value(mu_bar - h, b1, b2, rho, mu_bar).unwrap();
            assert!(((v - left) / h - b1).abs() < 1e-5, "smooth pasting {b1} {b2} {rho}");
        }
    }

    #[test]
    fn discount_value_small_rho_limit() {
        // θ enumeration: both good → b1, exactly one good → that bid.
        let (mu, b1, b2) = (0.5, 1.0, 0.6);
        let exact = mu * mu * b1 + mu * (1.0 - mu) * b1 + (1.0 - mu) * mu * b2;
        let rho = 1e-7;
        let v = fpa_discount_value(mu, b1, b2, rho, 1.0 - rho * b1 / b2).unwrap();
        assert!((v - exact).abs() < 1e-5);
    }

    #[test]
    fn spa3_examples() {
        assert_eq!(spa3_policy(1.0, 0.5, 0.3).kind, StopKind::ContinueUntilNews);
        assert_abs_diff_eq!(spa3_value(1.0, 0.5, 0.3).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(spa3_policy(1.0, 0.8, 0.3).kind, StopKind::StopNow);
        assert_abs_diff_eq!(spa3_value(0.4, 0.8, 0.3).unwrap(), 0.32, epsilon = 1e-15);
        assert_eq!(spa3_policy(1.0, 0.8, 0.0).kind, StopKind::StopNow);
        assert_abs_diff_eq!(spa3_value(0.7, 0.8, 0.0).unwrap(), 0.56, epsilon = 1e-15);
    }

    #[test]
    fn fpa_n_examples() {
        let b = bids(&[0.9, 0.8, 0.1]);
        let o = fpa_n_stop(&b, &world(&[2.0, INF, INF]));
        assert_eq!((o.winner, o.realized_revenue), (Some(1), 0.8));
        assert_eq!(o.exercise_time, INF);
        let o = fpa_n_stop(&b, &world(&[2.0, 1.0, 3.0]));
        assert_eq!((o.winner, o.realized_revenue), (None, 0.0));
        assert_eq!(o.exercise_time, 2.0);
        let o = fpa_n_stop(&b, &world(&[INF, INF, INF]));
        assert_eq!((o.winner, o.realized_revenue), (Some(0), 0.9));
    }

    #[test]
    fn executor_second_price_examples() {
        let spec = AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params(0.5, 0.0, 2)).unwrap();
        let b = bids(&[0.9, 0.4]);
        let o = exercise(&spec, &b, &world(&[INF, 1.0])).unwrap();
        assert_eq!(o.winner, Some(0));
        assert_eq!(o.payment_if_clicked, 0.4);
        assert_eq!(o.exercise_time, 0.0);
        assert_eq!(o.realized_revenue, 0.4);
        let o = exercise(&spec, &b, &world(&[0.7, INF])).unwrap();
        assert_eq!(o.realized_revenue, 0.0);
    }

    #[test]
    fn executor_reserve_continuation() {
        let spec = AuctionSpec::new(AuctionFormat::SecondPrice, 0.4, params(0.5, 0.0, 2)).unwrap();
        let b = bids(&[0.9, 0.6]);
        let o = exercise(&spec, &b, &world(&[INF, 1.3])).unwrap();
        assert_eq!(o.exercise_time, 1.3);
        assert_eq!(o.winner, Some(0));
        assert_eq!(o.payment_if_clicked, 0.4);
        assert_eq!(o.realized_revenue, 0.4);
        // Without a tick the auction clears at the limit at the second bid.
        let o = exercise(&spec, &b, &world(&[INF, INF])).unwrap();
        assert_eq!((o.exercise_time, o.realized_revenue), (INF, 0.6));
        // Fault injection removes the floor.
        let o = exercise_with(&spec, &b, &world(&[INF, 1.3]), &ExerciseOptions { floor_at_reserve: false })
            .unwrap();
        assert_eq!(o.realized_revenue, 0.0);
    }

    #[test]
    fn executor_discounted_first_price() {
        let m = params(0.5, 0.1, 2);
        let spec = AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, m).unwrap();
        let b = bids(&[1.0, 1.0]);
        let t_bar = 9f64.ln();
        let o = exercise(&spec, &b, &world(&[INF, INF])).unwrap();
        assert_abs_diff_eq!(o.exercise_time, t_bar, epsilon = 1e-12);
        assert_abs_diff_eq!(o.realized_revenue, (-0.1 * t_bar).exp(), epsilon = 1e-12);
        // Clock of bidder 1 ticks first: bidder 2 wins at own bid.
        let o = exercise(&spec, &b, &world(&[0.5, INF])).unwrap();
        assert_eq!(o.winner, Some(1));
        assert_abs_diff_eq!(o.realized_revenue, (-0.05f64).exp(), epsilon = 1e-15);
        // Bids so lopsided that the auction runs at once.
        let o = exercise(&spec, &bids(&[1.0, 0.05]), &world(&[0.5, INF])).unwrap();
        assert_eq!((o.exercise_time, o.winner, o.realized_revenue), (0.0, Some(0), 0.0));
    }

    #[test]
    fn unsupported_cells() {
        let spec = AuctionSpec::new(AuctionFormat::SecondPrice, 0.4, params(0.5, 0.1, 2)).unwrap();
        let e = exercise(&spec, &bids(&[0.9, 0.6]), &world(&[INF, INF]));
        assert!(matches!(e, Err(Error::UnsupportedCombination(_))));
        let spec = AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params(0.5, 0.0, 4)).unwrap();
        assert!(spec.check_supported().is_err());
        let spec = AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, params(0.5, 0.0, 6)).unwrap();
        assert!(spec.check_supported().is_ok());
        let spec = AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, params(0.5, 0.2, 3)).unwrap();
        assert!(spec.check_supported().is_err());
    }

    #[test]
    fn second_price_under_first_price_timing() {
        let spec = AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params(0.5, 0.0, 2))
            .unwrap()
            .with_rule(ExerciseRule::FirstPriceTiming);
        let b = bids(&[0.9, 0.4]);
        let o = exercise(&spec, &b, &world(&[INF, INF])).unwrap();
        assert_eq!((o.winner, o.realized_revenue), (Some(0), 0.4));
        // Competition vanished before the auction ran: the survivor pays nothing.
        let o = exercise(&spec, &b, &world(&[INF, 0.3])).unwrap();
        assert_eq!((o.winner, o.realized_revenue, o.exercise_time), (Some(0), 0.0, 0.3));
    }
}
