//! Economic primitives: value laws, market parameters, belief dynamics and sampling.

pub mod dist;
pub mod market;

pub use dist::{RegularityReport, RegularityViolation, Tabulated, ValueDistribution};
pub use market::{
    belief_at, belief_no_news, logistic_step, logit, sample_values, sample_world, BeliefState,
    BidProfile, MarketParams, WorldRealization,
};
