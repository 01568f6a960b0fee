//! Experiment runner plumbing: config files, run manifests, and the bodies
//! of the `bia` subcommands. Lives in the library so integration tests can
//! drive the commands without spawning a process.

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::{cmd_fz, cmd_lemma1, cmd_power, cmd_rates, cmd_verify};
pub use config::{load_config, parse_config, RunConfig};
pub use manifest::RunManifest;
