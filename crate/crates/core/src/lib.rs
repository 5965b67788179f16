//! Deterministic laboratory for facet x representation performance
//! experiments: data synthesis, a trading-day agent simulator, the
//! descriptive/Welch/ANOVA battery, BIC-selected Gaussian mixtures,
//! cluster evaluation and an adaptive representation recommender.

pub mod acfloop;
pub mod domain;
pub mod error;
pub mod evalmetrics;
pub mod marketsim;
pub mod mixture;
pub mod stats;
pub mod synthlab;

pub use error::{Error, Result};
