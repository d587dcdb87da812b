//! Dynamically scored ad auctions under Poisson bad-news learning.
//!
//! The crate computes the auctioneer's optimal exercise (stopping) policies
//! for first- and second-price auctions, equilibrium first-price bids,
//! optimal reserves and expected revenues, and cross-checks every closed
//! form against an independent dynamic program and Monte Carlo simulation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod revenue;
pub mod rng;
pub mod stats;
pub mod stopping;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    belief_at, belief_no_news, sample_values, sample_world, BeliefState, BidProfile, MarketParams,
    Tabulated, ValueDistribution, WorldRealization,
};
pub use stats::RevenueEstimate;
pub use stopping::{
    exercise, AuctionFormat, AuctionSpec, ExerciseOptions, ExerciseRule, Outcome, PolicyDecision,
    StopKind,
};
