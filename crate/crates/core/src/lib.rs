//! Core numerics for debiasing under-resolved quasi-geostrophic simulations.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral_qg`]: pseudo-spectral two-layer QG solver with bottom
//!   topography, RK4 time stepping and a binary trajectory format.
//! * [`nudging`]: fine-to-coarse projection, nudged coarse integration and the
//!   per-mode spectral correction that together produce a [`nudging::TrainingSet`].
//! * [`nets`]: LSTM-based correction operators (RNN, VAE-RNN, STORN, VRNN),
//!   a hand-written reverse-mode gradient engine, Adam training and ensembles.
//! * [`stats`]: histogram-based pdf metrics, spectra, correlations,
//!   exceedance areas and excursion statistics.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

pub mod nets;
pub mod nudging;
pub mod par;
pub mod spectral_qg;
pub mod stats;

pub use num_complex::Complex64;
