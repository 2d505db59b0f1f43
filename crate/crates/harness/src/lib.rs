//! Experiment runner for `flowlab-core`.
//!
//! One JSON config drives one pipeline (`mollify`, `flow`, `density`,
//! `stability`, `fpe`, `ldp`). Every run writes its resolved config, CSV
//! tables with header rows, JSON reports stamped with the config hash and a
//! manifest of `sha256` checksums. Randomness flows from the single master
//! seed through `(seed, replicate, particle)` streams, so equal configs give
//! byte-identical outputs.

pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, Kind};
pub use error::{HarnessError, Result};
pub use manifest::RunManifest;
pub use run::{run_experiment, RunOptions};
