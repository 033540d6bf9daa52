//! Experiment plumbing around the `brickwall` library: TOML configs, JSON
//! gate files, CSV tables and the oracle battery.

pub mod commands;
pub mod config;
pub mod gatefile;
pub mod oracles;
pub mod verify;

pub use config::ExperimentConfig;
pub use gatefile::GateFile;
