//! Revenue computation: Monte Carlo simulation of the exercised auctions
//! and closed-form benchmarks built from virtual values.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    fpa_bid_with_reserve, fpa_equilibrium_solve, optimal_reserve, BidFunction, BidStrategy,
    ClosedFormBids, SolverOptions, SolverReport,
};
use crate::error::{invalid, Error, Result};
use crate::model::{sample_values, sample_world, BidProfile, MarketParams, ValueDistribution};
use crate::oracle::enumerate_expected_revenue;
use crate::quadrature::gauss_legendre;
use crate::rng::replication_rng;
use crate::stats::{try_replicate, Moments, RevenueEstimate};
use crate::stopping::{exercise_with, AuctionFormat, AuctionSpec, ExerciseOptions, ExerciseRule};

const QUAD_TOL: f64 = 1e-12;

/// How bids are formed from sampled values.
#[derive(Debug, Clone, PartialEq)]
pub enum Bidding {
    Truthful,
    /// The `r = 0` first-price closed form (with the reserve form when the
    /// spec has a reserve).
    ClosedFormFpa,
    SolvedEquilibrium(BidFunction),
    /// Fixed bids, ignoring values.
    FixedBids(Vec<f64>),
}

impl Bidding {
    pub fn name(&self) -> &'static str {
        match self {
            Bidding::Truthful => "truthful",
            Bidding::ClosedFormFpa => "closed_form",
            Bidding::SolvedEquilibrium(_) => "equilibrium",
            Bidding::FixedBids(_) => "fixed",
        }
    }

    /// Checks that the bidding mode fits the auction: truthful bids only
    /// where the exercise time ignores the bids, first-price strategies
    /// only for two-bidder first-price auctions.
    pub fn check(&self, spec: &AuctionSpec) -> Result<()> {
        let n = spec.params.n;
        let unsupported = |msg: &str| Err(Error::UnsupportedCombination(format!("{msg} ({})", spec.describe())));
        match self {
            Bidding::Truthful => {
                let bid_free_timing = spec.format == AuctionFormat::SecondPrice
                    && (spec.rule == ExerciseRule::FirstPriceTiming || (spec.reserve == 0.0 && n == 2));
                if !bid_free_timing {
                    return unsupported("truthful bidding needs second-price with bid-independent timing");
                }
            }
            Bidding::ClosedFormFpa => {
                if spec.format != AuctionFormat::FirstPrice || n != 2 || spec.params.r > 0.0 {
                    return unsupported("closed-form bids need a two-bidder first-price auction at r = 0");
                }
            }
            Bidding::SolvedEquilibrium(_) => {
                if spec.format != AuctionFormat::FirstPrice || n != 2 {
                    return unsupported("equilibrium bids need a two-bidder first-price auction");
                }
            }
            Bidding::FixedBids(b) => {
                if b.len() != n {
                    return Err(invalid("bids", format!("{} fixed bids for n = {n}", b.len())));
                }
                BidProfile::new(b.clone())?;
            }
        }
        Ok(())
    }

    fn bids(&self, spec: &AuctionSpec, dist: &ValueDistribution, values: &[f64]) -> Result<BidProfile> {
        let bids = match self {
            Bidding::Truthful => values.to_vec(),
            Bidding::ClosedFormFpa => values
                .iter()
                .map(|&v| Ok(fpa_bid_with_reserve(dist, spec.params.p, spec.reserve, v)?.unwrap_or(0.0)))
                .collect::<Result<Vec<f64>>>()?,
            Bidding::SolvedEquilibrium(f) => values.iter().map(|&v| f.bid(v).unwrap_or(0.0)).collect(),
            Bidding::FixedBids(b) => b.clone(),
        };
        BidProfile::new(bids)
    }
}

/// One auction format with its bidding mode, for paired simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub spec: AuctionSpec,
    pub bidding: Bidding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: AuctionSpec,
    pub dist: ValueDistribution,
    pub bidding: Bidding,
    pub n_samples: u64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.check_supported()?;
        self.bidding.check(&self.spec)?;
        if self.n_samples == 0 {
            return Err(invalid("n_samples", "must be at least 1"));
        }
        Ok(())
    }
}

/// Mean realized revenue over `n_samples` seeded replications.
pub fn simulate_revenue(config: &ExperimentConfig) -> Result<RevenueEstimate> {
    config.validate()?;
    let arm = Arm {
        spec: config.spec,
        bidding: config.bidding.clone(),
    };
    let m = simulate_arms(&config.dist, &[arm], config.n_samples, config.seed)?;
    Ok(m.estimate(0, config.seed))
}

/// Simulates several arms on common random numbers: replication `i` draws
/// the same values and world for every arm.
pub fn simulate_arms(dist: &ValueDistribution, arms: &[Arm], n_samples: u64, seed: u64) -> Result<Moments> {
    simulate_arms_with(dist, arms, n_samples, seed, &ExerciseOptions::default())
}

pub fn simulate_arms_with(
    dist: &ValueDistribution,
    arms: &[Arm],
    n_samples: u64,
    seed: u64,
    opts: &ExerciseOptions,
) -> Result<Moments> {
    let Some(first) = arms.first() else {
        return Err(invalid("arms", "nothing to simulate"));
    };
    let params = first.spec.params;
    for arm in arms {
        arm.spec.check_supported()?;
        arm.bidding.check(&arm.spec)?;
        if arm.spec.params != params {
            return Err(invalid("arms", "paired arms must share market parameters"));
        }
    }
    try_replicate(n_samples, arms.len(), |i, out| -> Result<()> {
        let mut rng = replication_rng(seed, i);
        let values = sample_values(dist, params.n, &mut rng);
        let world = sample_world(&params, &mut rng);
        for (slot, arm) in out.iter_mut().zip(arms) {
            let bids = arm.bidding.bids(&arm.spec, dist, &values)?;
            *slot = exercise_with(&arm.spec, &bids, &world, opts)?.realized_revenue;
        }
        Ok(())
    })
}

/// `E[max{φ(v1), φ(v2)}]` for two iid values, as `∫ φ f · 2F`.
pub fn expected_max_virtual(dist: &ValueDistribution) -> f64 {
    dist.integrate(|v| dist.virtual_density(v) * 2.0 * dist.cdf(v), QUAD_TOL)
}

/// `E[φ(v)]` for a single draw (zero for any distribution).
pub fn expected_virtual(dist: &ValueDistribution) -> f64 {
    dist.integrate(|v| dist.virtual_density(v), QUAD_TOL)
}

fn knots_from(dist: &ValueDistribution, from: f64) -> Vec<f64> {
    let mut k: Vec<f64> = dist.knots().into_iter().filter(|&x| x > from).collect();
    k.insert(0, from);
    k
}

/// `E[max{φ(v1), φ(v2), 0}]` for a regular distribution.
pub fn expected_max_virtual_positive(dist: &ValueDistribution) -> f64 {
    let r = optimal_reserve(dist).reserve;
    crate::quadrature::integrate_knots(
        |v| dist.virtual_density(v) * 2.0 * dist.cdf(v),
        &knots_from(dist, r),
        QUAD_TOL,
    )
}

/// `E[max{φ(v), 0}]` for a regular distribution.
pub fn expected_virtual_positive(dist: &ValueDistribution) -> f64 {
    let r = optimal_reserve(dist).reserve;
    crate::quadrature::integrate_knots(|v| dist.virtual_density(v), &knots_from(dist, r), QUAD_TOL)
}

/// Expected revenue of the optimally exercised two-bidder auction without
/// reserve at `r = 0`: `p E[max φ]` (second price), `p² E[max φ]` (first).
pub fn revenue_closed_form(format: AuctionFormat, dist: &ValueDistribution, p: f64) -> f64 {
    let m = expected_max_virtual(dist);
    match format {
        AuctionFormat::SecondPrice => p * m,
        AuctionFormat::FirstPrice => p * p * m,
    }
}

/// Revenue of the optimal mechanism:
/// `p² E[max(φ1, φ2, 0)] + 2p(1 − p) E[max(φ, 0)]`.
pub fn optimal_revenue(dist: &ValueDistribution, p: f64) -> f64 {
    p * p * expected_max_virtual_positive(dist) + 2.0 * p * (1.0 - p) * expected_virtual_positive(dist)
}

/// Ratio of simulated second- to first-price revenue against `1/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub ratio: f64,
    pub std_error: f64,
    pub target: f64,
    pub second_price: RevenueEstimate,
    pub first_price: RevenueEstimate,
    pub passed: bool,
}

impl RatioCheck {
    pub fn within(&self, sigmas: f64) -> bool {
        (self.ratio - self.target).abs() <= sigmas * self.std_error
    }
}

/// Ratio of means with a delta-method standard error from paired samples.
pub fn ratio_of_means(m: &Moments, num: usize, den: usize) -> (f64, f64) {
    let n = m.count as f64;
    let (a, b) = (m.mean(num), m.mean(den));
    let ratio = a / b;
    let var = (m.covariance(num, num) - 2.0 * ratio * m.covariance(num, den)
        + ratio * ratio * m.covariance(den, den))
        / (b * b * n);
    (ratio, var.max(0.0).sqrt())
}

/// Simulates truthful second-price and closed-form first-price bidding
/// (two bidders, no reserve, `r = 0`) on common random numbers; passes
/// when the revenue ratio is within three standard errors of `1/p`.
pub fn check_revenue_ratio(dist: &ValueDistribution, p: f64, n_samples: u64, seed: u64) -> Result<RatioCheck> {
    let params = MarketParams::new(p, 1.0, 0.0, 2)?;
    let arms = [
        Arm {
            spec: AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params)?,
            bidding: Bidding::Truthful,
        },
        Arm {
            spec: AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, params)?,
            bidding: Bidding::ClosedFormFpa,
        },
    ];
    let m = simulate_arms(dist, &arms, n_samples, seed)?;
    let (ratio, std_error) = ratio_of_means(&m, 0, 1);
    let mut check = RatioCheck {
        ratio,
        std_error,
        target: 1.0 / p,
        second_price: m.estimate(0, seed),
        first_price: m.estimate(1, seed),
        passed: false,
    };
    check.passed = check.within(3.0);
    Ok(check)
}

/// Exact expected revenue of a symmetric two-bidder strategy: the
/// θ-enumerated revenue integrated over both values by Gauss–Legendre,
/// with the inner integral split on the diagonal where the ranking flips.
pub fn expected_revenue_quadrature<S: BidStrategy>(
    spec: &AuctionSpec,
    dist: &ValueDistribution,
    strategy: &S,
    panels: usize,
) -> Result<f64> {
    if spec.params.n != 2 {
        return Err(Error::UnsupportedCombination("quadrature revenue is two-bidder only".into()));
    }
    let (lo, hi) = (dist.support_lo(), dist.support_hi());
    let failure = std::cell::Cell::new(None);
    let revenue = |v1: f64, v2: f64| -> f64 {
        let b = |v: f64| strategy.bid(v).unwrap_or(0.0);
        match BidProfile::new(vec![b(v1), b(v2)]).and_then(|bp| enumerate_expected_revenue(spec, &bp)) {
            Ok(x) => x * dist.pdf(v1) * dist.pdf(v2),
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let inner = |v1: f64| {
        let below = ((v1 - lo) / (hi - lo) * panels as f64).ceil().max(1.0) as usize;
        let above = ((hi - v1) / (hi - lo) * panels as f64).ceil().max(1.0) as usize;
        gauss_legendre(|v2| revenue(v1, v2), lo, v1, below) + gauss_legendre(|v2| revenue(v1, v2), v1, hi, above)
    };
    let total = gauss_legendre(inner, lo, hi, panels);
    match failure.take() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// One row of the discount-rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountRow {
    pub r: f64,
    pub first_price: RevenueEstimate,
    pub second_price: RevenueEstimate,
    /// Noise-free first-price revenue of the bids used (quadrature).
    pub first_price_exact: f64,
    pub second_price_exact: f64,
    /// `None` for the `r = 0` row, which uses the closed-form bids.
    pub solver: Option<SolverReport>,
}

/// First- and second-price revenue across discount rates: the first-price
/// auction uses the solved equilibrium at each `r`, the second-price
/// auction truthful bids (its exercise time is 0, so `r` is inert). An
/// `r = 0` anchor row with the closed-form bids is always included first.
pub fn revenue_vs_discount(
    dist: &ValueDistribution,
    p: f64,
    lambda: f64,
    r_grid: &[f64],
    n_samples: u64,
    seed: u64,
    solver: &SolverOptions,
) -> Result<Vec<DiscountRow>> {
    let mut rows = Vec::with_capacity(r_grid.len() + 1);
    let mut rates = vec![0.0];
    rates.extend(r_grid.iter().copied().filter(|&r| r > 0.0));
    let spa_exact = revenue_closed_form(AuctionFormat::SecondPrice, dist, p);
    for r in rates {
        let params = MarketParams::new(p, lambda, r, 2)?;
        let fpa = AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, params)?;
        let (bidding, exact, report) = if r == 0.0 {
            let cf = ClosedFormBids {
                dist: dist.clone(),
                p,
                reserve: 0.0,
            };
            (Bidding::ClosedFormFpa, expected_revenue_quadrature(&fpa, dist, &cf, 64)?, None)
        } else {
            let (bf, report) = fpa_equilibrium_solve(dist, &params, solver)?;
            let exact = expected_revenue_quadrature(&fpa, dist, &bf, 64)?;
            (Bidding::SolvedEquilibrium(bf), exact, Some(report))
        };
        let arms = [
            Arm {
                spec: AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params)?,
                bidding: Bidding::Truthful,
            },
            Arm { spec: fpa, bidding },
        ];
        let m = simulate_arms(dist, &arms, n_samples, seed)?;
        rows.push(DiscountRow {
            r,
            first_price: m.estimate(1, seed),
            second_price: m.estimate(0, seed),
            first_price_exact: exact,
            second_price_exact: spa_exact,
            solver: report,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(format: AuctionFormat, reserve: f64, p: f64) -> AuctionSpec {
        AuctionSpec::new(format, reserve, MarketParams::new(p, 1.0, 0.0, 2).unwrap()).unwrap()
    }

    #[test]
    fn virtual_value_moments_uniform() {
        let u = ValueDistribution::uniform();
        assert_abs_diff_eq!(expected_max_virtual(&u), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_virtual(&u), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_max_virtual_positive(&u), 5.0 / 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(expected_virtual_positive(&u), 0.25, epsilon = 1e-9);
        assert_abs_diff_eq!(optimal_revenue(&u, 0.5), 0.25 * 5.0 / 12.0 + 0.125, epsilon = 1e-9);
    }

    #[test]
    fn point_mass_limit() {
        // Power(k) concentrates at 1 as k grows; E[max φ] → 1.
        let d = ValueDistribution::power(2000.0).unwrap();
        assert!((expected_max_virtual(&d) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn closed_form_ratio_is_inverse_p() {
        let d = ValueDistribution::power(2.0).unwrap();
        for &p in &[0.1, 0.5, 1.0] {
            let r = revenue_closed_form(AuctionFormat::SecondPrice, &d, p)
                / revenue_closed_form(AuctionFormat::FirstPrice, &d, p);
            assert_abs_diff_eq!(r, 1.0 / p, epsilon = 1e-12);
        }
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let cfg = ExperimentConfig {
            spec: spec(AuctionFormat::FirstPrice, 0.0, 0.5),
            dist: ValueDistribution::uniform(),
            bidding: Bidding::ClosedFormFpa,
            n_samples: 20_000,
            seed: 11,
        };
        let a = simulate_revenue(&cfg).unwrap();
        let b = simulate_revenue(&cfg).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn bidding_modes_are_validated() {
        let u = ValueDistribution::uniform();
        let bad = ExperimentConfig {
            spec: spec(AuctionFormat::FirstPrice, 0.0, 0.5),
            dist: u.clone(),
            bidding: Bidding::Truthful,
            n_samples: 10,
            seed: 0,
        };
        assert!(matches!(bad.validate(), Err(Error::UnsupportedCombination(_))));
        let bad = ExperimentConfig {
            spec: spec(AuctionFormat::SecondPrice, 0.3, 0.5),
            bidding: Bidding::Truthful,
            ..bad
        };
        assert!(bad.validate().is_err());
        let ok = ExperimentConfig {
            bidding: Bidding::FixedBids(vec![0.9, 0.6]),
            ..bad
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn quadrature_revenue_matches_closed_form() {
        let u = ValueDistribution::uniform();
        let s = spec(AuctionFormat::FirstPrice, 0.0, 0.5);
        let cf = ClosedFormBids {
            dist: u.clone(),
            p: 0.5,
            reserve: 0.0,
        };
        let v = expected_revenue_quadrature(&s, &u, &cf, 64).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 12.0, epsilon = 1e-9);
    }

    #[test]
    fn ratio_of_identical_columns() {
        let mut m = Moments::new(2);
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(&[x, x]);
        }
        let (r, se) = ratio_of_means(&m, 0, 1);
        assert_eq!(r, 1.0);
        assert!(se < 1e-12);
    }
}
