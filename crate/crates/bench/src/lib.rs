//! Shared fixtures for the criterion benchmarks.

use dynascore::equilibrium::SolverOptions;
use dynascore::revenue::{Arm, Bidding};
use dynascore::{AuctionFormat, AuctionSpec, MarketParams};

/// Second price with truthful bids and first price with closed-form bids,
/// uniform values, `r = 0`.
pub fn revenue_pair(p: f64) -> Vec<Arm> {
    let params = MarketParams::new(p, 1.0, 0.0, 2).expect("valid market");
    vec![
        Arm {
            spec: AuctionSpec::new(AuctionFormat::SecondPrice, 0.0, params).expect("valid spec"),
            bidding: Bidding::Truthful,
        },
        Arm {
            spec: AuctionSpec::new(AuctionFormat::FirstPrice, 0.0, params).expect("valid spec"),
            bidding: Bidding::ClosedFormFpa,
        },
    ]
}

/// A single best-response sweep on a small grid.
pub fn one_sweep(value_points: usize, bid_points: usize) -> SolverOptions {
    SolverOptions {
        value_points,
        bid_points,
        max_iters: 1,
        ..SolverOptions::default()
    }
}
