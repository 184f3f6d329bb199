//! Campaign optimization for real-time-bidding advert logs.
//!
//! The pipeline has three stages, mirrored by the module layout:
//!
//! 1. [`data`] — ingest delimited impression logs (or generate synthetic
//!    ones), split them in time order, and cut per-campaign slices.
//! 2. [`model`] + [`scoring`] — train an online logistic-regression
//!    conversion model over hashed categorical features, predict a
//!    conversion probability per impression, and derive per-impression
//!    profitability (probability divided by price).
//! 3. [`search`] + [`strategies`] — enumerate attribute/value
//!    configurations, score each by average profitability capped at the
//!    advertiser's required visit count, prune dominated candidates, and
//!    run the built-in analysis strategies over campaign slices.

pub mod data;
pub mod model;
pub mod scoring;
pub mod search;
pub mod strategies;
