//! Statistical diagnostics of stream-function trajectories.
//!
//! Density estimates and the two pdf distances, Welch spectra, zonal-mode
//! cross-correlations, exceedance areas, zonal averages with their
//! moving-average energy and excursion statistics, and the normalized
//! variance field. Functions taking raw slices expect time-major data
//! (`T × points`); the trajectory wrappers pick one layer.

mod excursions;
mod fields;
mod histogram;
mod spectra;

pub use excursions::{excursion_stats, excursion_stats_field, ExcursionReport};
pub use fields::{
    energy_gamma, exceedance_area, exceedance_fraction, layer_series, normalized_variance, normalized_variance_field,
    regional_pdfs, region_bounds, zonal_average, zonal_average_field,
};
pub use histogram::{kl_divergence, l1_logpdf, padded_range, Histogram, DEFAULT_BINS, LOG_FLOOR};
pub use spectra::{cross_correlation, fourier_cross_correlation, mode_series, psd, welch, PsdEstimate, SEGMENT};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("histograms do not share bin edges")]
    EdgeMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mode ({kx}, {ky}) is not resolved on a {nx}² grid")]
    ModeOutOfRange { kx: i64, ky: i64, nx: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
}
