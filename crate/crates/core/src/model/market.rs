//! Market parameters, sampled worlds and the Poisson bad-news belief process.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::dist::ValueDistribution;
use crate::error::{invalid, Error, Result};

/// Prior `p` on quality, news intensity `lambda`, discount rate `r`, bidders `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub p: f64,
    pub lambda: f64,
    pub r: f64,
    pub n: usize,
}

impl MarketParams {
    /// Validates the parameters. The degenerate priors `p ∈ {0, 1}` are
    /// accepted so limits can be evaluated exactly; operations that divide by
    /// `p` or `1 − p` reject them individually.
    pub fn new(p: f64, lambda: f64, r: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("{p} not in [0, 1]")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("{lambda} must be positive and finite")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(invalid("r", format!("{r} must be nonnegative and finite")));
        }
        if n < 2 {
            return Err(invalid("n", format!("{n} bidders; need at least 2")));
        }
        Ok(Self { p, lambda, r, n })
    }

    /// `ρ = r / λ`.
    pub fn rho(&self) -> f64 {
        self.r / self.lambda
    }

    pub fn with_r(self, r: f64) -> Result<Self> {
        Self::new(self.p, self.lambda, r, self.n)
    }

    pub fn with_n(self, n: usize) -> Result<Self> {
        Self::new(self.p, self.lambda, self.r, n)
    }

    /// Discount factor `e^{−r t}`, with `e^{−r·∞} = 0` for `r > 0` and 1 for `r = 0`.
    pub fn discount(&self, t: f64) -> f64 {
        if self.r == 0.0 {
            1.0
        } else {
            (-self.r * t).exp()
        }
    }
}

/// Qualities and first bad-news times; `clocks[i]` is `+∞` exactly when `theta[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldRealization {
    theta: Vec<bool>,
    clocks: Vec<f64>,
}

impl WorldRealization {
    pub fn new(theta: Vec<bool>, clocks: Vec<f64>) -> Result<Self> {
        if theta.len() != clocks.len() {
            return Err(invalid("clocks", "length differs from theta"));
        }
        for (i, (&good, &c)) in theta.iter().zip(&clocks).enumerate() {
            if good != (c == f64::INFINITY) {
                return Err(invalid(
                    "clocks",
                    format!("bidder {i}: clock must be infinite exactly for good quality"),
                ));
            }
            if !good && !(c > 0.0 && c.is_finite()) {
                return Err(invalid("clocks", format!("bidder {i}: clock {c} must be positive")));
            }
        }
        Ok(Self { theta, clocks })
    }

    /// Builds a world from clocks alone; `∞` marks a good ad.
    pub fn from_clocks(clocks: Vec<f64>) -> Result<Self> {
        let theta = clocks.iter().map(|&c| c == f64::INFINITY).collect();
        Self::new(theta, clocks)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[bool] {
        &self.theta
    }

    pub fn clocks(&self) -> &[f64] {
        &self.clocks
    }

    pub fn is_good(&self, i: usize) -> bool {
        self.theta[i]
    }

    /// Finite clocks in increasing order.
    pub fn sorted_ticks(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.clocks.iter().copied().filter(|c| c.is_finite()).collect();
        t.sort_by(f64::total_cmp);
        t
    }

    /// Index and time of the first tick, if any.
    pub fn first_tick(&self) -> Option<(usize, f64)> {
        self.clocks
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| c.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Nonnegative finite bids, one per bidder.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile(Vec<f64>);

impl BidProfile {
    pub fn new(bids: Vec<f64>) -> Result<Self> {
        if let Some(b) = bids.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(invalid("bids", format!("{b} is not a finite nonnegative bid")));
        }
        Ok(Self(bids))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bidder indices ordered by decreasing bid, lower index first on ties.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx
    }
}

impl std::ops::Index<usize> for BidProfile {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Posterior qualities at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub mu: Vec<f64>,
    pub time: f64,
}

/// Common belief after `t` units of time without news:
/// `p / (p + (1 − p) e^{−λ t})`.
pub fn belief_no_news(params: &MarketParams, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(logistic_step(params.p, params.lambda * t))
}

/// Belief reached from `mu` after news-free time `s` measured in units of `1/λ`.
pub fn logistic_step(mu: f64, s: f64) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    if s == f64::INFINITY {
        return 1.0;
    }
    mu / (mu + (1.0 - mu) * (-s).exp())
}

pub fn logit(mu: f64) -> f64 {
    (mu / (1.0 - mu)).ln()
}

/// Beliefs of every bidder at `t`: zero once the bidder's clock has ticked.
pub fn belief_at(params: &MarketParams, world: &WorldRealization, t: f64) -> Result<BeliefState> {
    let common = belief_no_news(params, t)?;
    let mu = world
        .clocks()
        .iter()
        .map(|&c| if t >= c { 0.0 } else { common })
        .collect();
    Ok(BeliefState { mu, time: t })
}

/// Draws qualities iid Bernoulli(p) and bad-news clocks iid Exp(λ) for bad ads.
pub fn sample_world<R: Rng + ?Sized>(params: &MarketParams, rng: &mut R) -> WorldRealization {
    let exp = Exp::new(params.lambda).expect("lambda validated positive");
    let mut theta = Vec::with_capacity(params.n);
    let mut clocks = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let good = rng.random::<f64>() < params.p;
        theta.push(good);
        clocks.push(if good {
            f64::INFINITY
        } else {
            // Exp can return exactly 0 with vanishing probability.
            loop {
                let c: f64 = exp.sample(rng);
                if c > 0.0 {
                    break c;
                }
            }
        });
    }
    WorldRealization { theta, clocks }
}

/// Draws `n` iid values by the quantile transform.
pub fn sample_values<R: Rng + ?Sized>(dist: &ValueDistribution, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| dist.quantile(rng.random::<f64>())).collect()
}
