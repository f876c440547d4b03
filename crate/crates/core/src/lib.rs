//! Weighted improved Greedy Sampling (WiGS) for pool-based active learning in regression.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: CSV ingestion, preprocessing, initial splits and the synthetic data-generating processes.
//! * [`geometry`]: nearest-labeled distance caches and the min–max normalisation used by WiGS.
//! * [`model`]: closed-form ridge regression, predictive variance, K-fold CV and bootstrap committees.
//! * [`selectors`]: every query strategy (GS family, WiGS, uncertainty, QBC, EMCM, EGAL) and the
//!   density-veto checker.
//! * [`weights`]: static, decaying and UCB1 weight policies.
//! * [`sac`]: the Soft Actor-Critic weight controller, written from scratch.
//! * [`metrics`]: full-pool RMSE, AUC, label efficiency, cross-seed aggregation, Wilcoxon tests.
//! * [`harness`]: configuration, seeded replications, persistence and reporting.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sac;
pub mod selectors;
pub mod weights;

pub use error::{Error, Result};
