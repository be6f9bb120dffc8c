//! Batch front end for the random-walk-in-random-scenery laboratory: parses
//! JSON experiment configurations, runs one diagnostic per invocation and
//! writes `manifest.json`, `rows.csv` and `summary.json`.

pub mod config;
pub mod rules;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, LabConfig, Mode};
pub use run::{run, RunError, RunSummary};
