//! Experiment harness for the encrypted extremum-seeking PID tuner:
//! configuration, drivers, and report emission behind the `estune` binary.

pub mod commands;
pub mod config;
pub mod report;
