//! Budgeted targeting under uncertainty: compare risk-based, treatment-effect-based
//! and random allocation of a scarce intervention on RCT-shaped data.
//!
//! The pipeline is built from a handful of pieces:
//!
//! - [`data`]: dataset model, CSV ingestion and seeded splitting.
//! - [`synthetic`]: RCT generator with known potential outcomes.
//! - [`learners`]: random forest, ridge and logistic learners.
//! - [`nuisance`]: cross-fitted nuisances and doubly-robust pseudo-outcomes.
//! - [`risk`]: baseline-risk scores and their percentile transform.
//! - [`curve`]: second-stage CATE model and the kernel-smoothed effect-vs-risk curve.
//! - [`confounding`]: selection bias injected by systematic removal.
//! - [`welfare`]: policies, policy values, welfare weights, the alpha search and the k-sweep.
//! - [`report`]: run configuration, SVG/CSV/JSON artifacts, and the command entry points.

#![allow(clippy::needless_range_loop)]

pub mod confounding;
pub mod curve;
pub mod data;
pub mod error;
pub mod learners;
pub mod matrix;
pub mod nuisance;
pub mod report;
pub mod risk;
pub mod seed;
pub mod stats;
pub mod synthetic;
pub mod welfare;

pub use error::{Error, Result};
pub use matrix::Matrix;
