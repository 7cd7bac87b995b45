//! Config-driven debiasing pipeline: simulate fine and coarse QG runs, build
//! nudged training data, train correction ensembles, correct the coarse test
//! run and report long-horizon statistics.
//!
//! Stages communicate only through files under the output directory, and
//! `manifest.json` records each stage's config hash and output hashes.

pub mod cli;
pub mod config;
mod error;
pub mod layout;
pub mod manifest;
pub mod seeds;
pub mod stages;

pub use config::ExperimentConfig;
pub use error::PipelineError;
pub use layout::Layout;
pub use manifest::{RunManifest, StageStatus};
