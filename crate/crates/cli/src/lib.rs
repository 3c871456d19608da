//! Command-line front end for `coop-limits`: resolves an experiment
//! configuration from a key-value file and flags, runs it, and writes a JSON
//! report plus CSV (and optionally gnuplot) files.

// `!(x > 0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, Experiment, ExperimentConfig, Overrides};
pub use error::CliError;
pub use output::Report;
pub use run::{run, Outcome};
