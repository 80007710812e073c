//! Command implementations behind the `exwarp` binary.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{Overrides, PolicySpec, RunConfig};
