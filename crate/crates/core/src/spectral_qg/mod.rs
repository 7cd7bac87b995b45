//! Pseudo-spectral two-layer quasi-geostrophic model on `[0, 2π)²`.
//!
//! The prognostic variable is the spectral potential vorticity of both
//! layers. Stream functions follow from a per-mode 2×2 inversion, the
//! Jacobian is evaluated on the grid with 2/3-rule dealiasing, and time is
//! advanced with classical RK4 under a CFL guard. Mean modes are pinned to
//! zero, and the topographic PV term enters the lower layer only.

mod grid;
mod integrate;
mod model;
mod params;
mod transform;
pub mod trajectory_io;

pub use grid::GridSpec;
pub use integrate::{
    advance, integrate, integrate_with, snapshot_count, steps_per_sample, PartialRun, Rhs, Rk4, Trajectory,
    CFL_LIMIT,
};
pub use model::{invert_mode, QgModel, SpectralState, LAYERS};
pub use params::{topography_field, QgParams, Topography, TOPOGRAPHY_CENTERS};
pub use trajectory_io::{write_atomic, read_header, read_trajectory, write_trajectory, TrajectoryHeader, TrajectoryReader, TrajectoryWriter};
pub use transform::SpectralTransform;


use thiserror::Error;

#[derive(Debug, Error)]
pub enum QgError {
    #[error("grid size {0} must be even and >= 8")]
    InvalidGrid(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("PV inversion is singular at |k|² = 0")]
    DegenerateInversion,
    #[error("numerical blow-up at t = {time}")]
    BlowUp { time: f64 },
    #[error("CFL violation at t = {time}: dt = {dt} gives CFL number {cfl:.3} > 0.5")]
    Cfl { time: f64, dt: f64, cfl: f64 },
    #[error("invalid time step {0}")]
    InvalidStep(f64),
    #[error("sample interval {sample_every} is not a positive integer multiple of dt = {dt}")]
    SamplingMismatch { sample_every: f64, dt: f64 },
    #[error("forcing reference does not cover t = {time}")]
    ReferenceExhausted { time: f64 },
    #[error("malformed trajectory file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
