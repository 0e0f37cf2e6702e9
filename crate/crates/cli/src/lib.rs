//! Batch front end for the simulator: configuration files, the run, compare,
//! sweep and verify modes, and their artifacts.

pub mod commands;
pub mod config;

pub use commands::{cmd_compare, cmd_run, cmd_sweep, cmd_verify, simulate, CliError, SimOptions, Simulation};
pub use config::{parse_config, ConfigError, RunConfig};
