//! Command-line front end for the allocation engine and chain harness.
//!
//! `run` simulates and writes traces plus a cost CSV, `crosscheck` recomputes every claim with
//! independent references, `stats` measures how far PDRF strays from the DRF loop, and `costfit`
//! fits per-call cost against the number of resources.

pub mod app;
pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod regression;

pub use app::run_cli;
pub use config::{ExperimentConfig, QuantityRange};
pub use error::{CliError, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE};
