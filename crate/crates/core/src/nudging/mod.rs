//! Aligned training data from a fine reference and coarse runs.
//!
//! The reference is projected onto the coarse grid by spectral truncation,
//! the coarse model is relaxed toward it with time scale `tau`, and the
//! nudged run is rescaled mode by mode so its time-integrated spectrum
//! matches the free coarse run.

mod correction;
mod nudged;
mod project;
mod training_set;

pub use correction::{apply_spectral_correction, spectral_ratio, SpectralRatio, RATIO_FLOOR};
pub use nudged::{integrate_nudged, NudgeConfig, NudgedModel};
pub use project::{project_to_coarse, project_trajectory, Projector};
pub use training_set::{build_training_set, NormStats, TrainingSet, METADATA_FILE};

use crate::spectral_qg::QgError;

#[derive(Debug, thiserror::Error)]
pub enum NudgeError {
    #[error("coarse grid {coarse} is finer than source grid {fine}")]
    CoarserThanSource { fine: usize, coarse: usize },
    #[error("invalid nudging time scale tau = {0}")]
    InvalidTau(f64),
    #[error("reference sampled every {sample_every}, more than tau/5 = {limit}")]
    UnderResolvedReference { sample_every: f64, limit: f64 },
    #[error("trajectories differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("zero standard deviation in layer {layer}")]
    ZeroVariance { layer: usize },
    #[error("malformed training set: {0}")]
    Metadata(String),
    #[error(transparent)]
    Solver(#[from] QgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
