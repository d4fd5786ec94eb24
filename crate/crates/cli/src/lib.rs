//! Library surface of the experiment harness: config parsing, experiment
//! assembly, and report emission. The `orbitstream` binary is a thin clap
//! wrapper over [`commands`].

pub mod commands;
pub mod config;
pub mod report;
