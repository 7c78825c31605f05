//! Sliding-window multivariate time series forest.
//!
//! A pipeline for interval-based classification of multivariate time
//! series, built around solar-flare forecasting from active-region
//! magnetic-field parameters:
//!
//! * [`data`]: instances, manifests, label binarization, imputation and
//!   partition splits.
//! * [`features`]: multi-scale sliding-window interval statistics and pooled
//!   transforms, fused into one feature vector per instance.
//! * [`forest`]: a class-weighted random forest with Gini importances.
//! * [`metrics`]: contingency tables and the TSS / weighted TSS / HSS skill scores.
//! * [`selection`]: partition-aware grid search and a content-addressed model index.
//! * [`ranking`]: per-experiment rankings, top-k membership, aggregated
//!   selected-feature counts and participation ratios.
//! * [`bootstrap`]: repeated subsampling campaigns with error bars and
//!   ex-ante feature selection.
//! * [`cli`]: the command implementations behind the `slimtsf` binary.
//!
//! See the crate's `examples/` directory for one runnable program per stage.

pub mod data;
pub mod error;
pub mod features;
pub mod forest;
mod io_util;
pub mod bootstrap;
pub mod cli;
pub mod ranking;
pub mod selection;
pub mod metrics;
pub mod synthetic;

pub use error::{Error, Result};
