use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::fields::layer_series;
use super::StatsError;
use crate::par;
use crate::spectral_qg::Trajectory;

/// Welch segment length in samples.
pub const SEGMENT: usize = 256;
const MIN_SAMPLES: usize = 64;
const POINT_CHUNK: usize = 16;

/// One-sided power spectral density, frequencies in cycles per time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    pub fn df(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// `Σ power · df`, the mean square of the signal.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq,power\n");
        for (f, p) in self.freqs.iter().zip(&self.power) {
            let _ = writeln!(s, "{f:e},{p:e}");
        }
        s
    }
}

struct Welch {
    seg: usize,
    fs: f64,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    norm: f64,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Welch {
    fn new(len: usize, sample_every: f64) -> Result<Self, StatsError> {
        if len < MIN_SAMPLES {
            return Err(StatsError::TooFewSamples { needed: MIN_SAMPLES, found: len });
        }
        if !(sample_every > 0.0 && sample_every.is_finite()) {
            return Err(StatsError::InvalidArgument(format!("sample interval {sample_every}")));
        }
        let seg = SEGMENT.min(len);
        let window: Vec<f64> = (0..seg).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / seg as f64).cos()).collect();
        let fs = 1.0 / sample_every;
        let norm = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
        let fft = FftPlanner::new().plan_fft_forward(seg);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Ok(Self { seg, fs, fft, window, norm, buf: vec![Complex64::default(); seg], scratch })
    }

    fn bins(&self) -> usize {
        self.seg / 2 + 1
    }

    /// Add the segment-averaged periodogram of `x` into `acc`.
    fn accumulate(&mut self, x: &[f64], acc: &mut [f64]) {
        let step = (self.seg / 2).max(1);
        let starts: Vec<usize> = (0..=x.len() - self.seg).step_by(step).collect();
        let inv = 1.0 / starts.len() as f64;
        let df = self.fs / self.seg as f64;
        for s in starts {
            let seg = &x[s..s + self.seg];
            let mean = seg.iter().sum::<f64>() / self.seg as f64;
            for (b, (v, w)) in self.buf.iter_mut().zip(seg.iter().zip(&self.window)) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
            for (k, a) in acc.iter_mut().enumerate() {
                let one_sided = if k == 0 || 2 * k == self.seg { 1.0 } else { 2.0 };
                *a += one_sided * self.buf[k].norm_sqr() * self.norm * inv;
            }
            // the segment mean is carried untapered at zero frequency
            acc[0] += mean * mean / df * inv;
        }
    }

    fn freqs(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| k as f64 * self.fs / self.seg as f64).collect()
    }
}

/// Welch estimate of one scalar series: Hann-tapered segments of
/// [`SEGMENT`] samples (the whole record if shorter) with 50% overlap. Each
/// segment's mean is removed before tapering and its power is booked at
/// zero frequency, so a steady signal does not leak into the first bins.
pub fn welch(series: &[f64], sample_every: f64) -> Result<PsdEstimate, StatsError> {
    let mut w = Welch::new(series.len(), sample_every)?;
    let mut power = vec![0.0; w.bins()];
    w.accumulate(series, &mut power);
    Ok(PsdEstimate { freqs: w.freqs(), power })
}

/// Welch spectra of every grid point of one layer, averaged over points.
pub fn psd(traj: &Trajectory, layer: usize) -> Result<PsdEstimate, StatsError> {
    let series = layer_series(traj, layer)?;
    let steps = traj.len();
    let points = traj.grid.len();
    let probe = Welch::new(steps, traj.sample_every)?;
    let bins = probe.bins();
    let chunks = points.div_ceil(POINT_CHUNK);
    let partial: Vec<Vec<f64>> = par::map_range(chunks, |c| {
        let mut w = Welch::new(steps, traj.sample_every).expect("validated above");
        let mut acc = vec![0.0; bins];
        let mut col = vec![0.0; steps];
        for p in c * POINT_CHUNK..((c + 1) * POINT_CHUNK).min(points) {
            for (t, v) in col.iter_mut().enumerate() {
                *v = series[t * points + p];
            }
            w.accumulate(&col, &mut acc);
        }
        acc
    });
    let mut power = vec![0.0; bins];
    for p in &partial {
        power.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    power.iter_mut().for_each(|v| *v /= points as f64);
    Ok(PsdEstimate { freqs: probe.freqs(), power })
}

/// Time series of the Fourier coefficient `(kx, ky)` of one layer, with the
/// forward normalization `1/nx²`.
pub fn mode_series(traj: &Trajectory, layer: usize, kx: i64, ky: i64) -> Result<Vec<Complex64>, StatsError> {
    let nx = traj.grid.nx();
    let half = (nx / 2) as i64;
    if kx.abs() >= half || ky.abs() >= half {
        return Err(StatsError::ModeOutOfRange { kx, ky, nx });
    }
    layer_series(traj, layer)?;
    let h = traj.grid.spacing();
    let ex: Vec<Complex64> = (0..nx).map(|i| Complex64::from_polar(1.0, -(kx as f64) * i as f64 * h)).collect();
    let ey: Vec<Complex64> = (0..nx).map(|j| Complex64::from_polar(1.0, -(ky as f64) * j as f64 * h)).collect();
    let inv = 1.0 / traj.grid.len() as f64;
    Ok(par::map_range(traj.len(), |t| {
        let f = traj.layer(t, layer);
        let mut acc = Complex64::default();
        for (j, row) in f.chunks(nx).enumerate() {
            let mut r = Complex64::default();
            for (i, v) in row.iter().enumerate() {
                r += ex[i] * v;
            }
            acc += ey[j] * r;
        }
        acc * inv
    }))
}

/// `Re Σ_t conj(a_t) b_{t+τ} / sqrt(Σ|a|² Σ|b|²)` for `τ = 0..=max_lag`.
pub fn cross_correlation(a: &[Complex64], b: &[Complex64], max_lag: usize) -> Result<Vec<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::InvalidArgument(format!("series lengths {} and {}", a.len(), b.len())));
    }
    if max_lag >= a.len() {
        return Err(StatsError::TooFewSamples { needed: max_lag + 1, found: a.len() });
    }
    let sa: f64 = a.iter().map(|z| z.re * z.re + z.im * z.im).sum();
    let sb: f64 = b.iter().map(|z| z.re * z.re + z.im * z.im).sum();
    let denom = if a == b { sa } else { (sa * sb).sqrt() };
    if denom == 0.0 {
        return Err(StatsError::Degenerate("mode has no energy".into()));
    }
    Ok((0..=max_lag)
        .map(|lag| {
            let n = a.len() - lag;
            a[..n].iter().zip(&b[lag..]).map(|(x, y)| x.re * y.re + x.im * y.im).sum::<f64>() / denom
        })
        .collect())
}

/// Cross-correlation of the zonally constant modes `(0, km)` and `(0, kn)`.
pub fn fourier_cross_correlation(
    traj: &Trajectory,
    layer: usize,
    km: i64,
    kn: i64,
    max_lag: usize,
) -> Result<Vec<f64>, StatsError> {
    let a = mode_series(traj, layer, 0, km)?;
    let b = if kn == km { a.clone() } else { mode_series(traj, layer, 0, kn)? };
    cross_correlation(&a, &b, max_lag)
}
