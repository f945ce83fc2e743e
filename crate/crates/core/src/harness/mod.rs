//! Experiment harness: manifests, checkpoints, coupled runs and CSV output.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod run;
