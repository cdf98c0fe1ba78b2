//! Run configuration and artifact emission.

pub mod commands;
pub mod config;
mod svg;

pub use commands::{cmd_alpha, cmd_curve, cmd_sweep, cmd_synth, with_threads};
pub use config::{CsvSource, CurveConfig, DatasetSource, RunConfig, EFFECTIVE_CONFIG};
pub use svg::{LinePlot, Series};
