//! Command-line experiments for the B-spline probabilistic ODE solver.
//!
//! A JSON config selects one of five commands (`solve`, `prior-sample`,
//! `pde-prior-sample`, `converge`, `infer`). Results are CSV tables and JSON
//! summaries plus a `manifest.json` that echoes the resolved config. Feeding
//! the manifest back in reproduces every output byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the `!(x >= 1.0)` style checks.

pub mod config;
pub mod error;
pub mod output;
pub mod problems;
pub mod run;

pub use config::{parse_config, parse_input, resolve, serialize_config, ExperimentConfig};
pub use error::CliError;
pub use run::{run_file, run_text, RunOptions, RunReport};
